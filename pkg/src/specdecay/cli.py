"""Command-line front end.

Subcommands share one JSON config and write JSON reports plus CSV series
into the output directory.  Exit codes: 0 success, 2 config error,
3 hypothesis failure, 4 numerical-consistency failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import contour as cnt
from . import semigroup as sg
from .config import ConfigError, RunConfig, build_system, load_config
from .gaps import build_contours, compute_N0, gaps, verify_region_cover
from .modal import DISSIPATIVE
from .spectrum import (damping_regime, frame_bounds, full_spectrum, localization_check,
                       re_formula_check, spectral_abscissa)

log = logging.getLogger("specdecay")

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERICAL = 0, 2, 3, 4


class HypothesisFailure(RuntimeError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_json(path: Path, data):
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def update_report(out: Path, section: str, data):
    path = out / "report.json"
    report = json.loads(path.read_text()) if path.exists() else {}
    report[section] = _jsonable(data)
    write_json(path, report)


class Run:
    """Lazily computed pipeline stages for one config."""

    def __init__(self, cfg: RunConfig, out: Path, seeds: Optional[Sequence[int]] = None):
        self.cfg = cfg
        self.out = out
        self.seeds = list(seeds) if seeds is not None else list(cfg.simulation.seeds)
        self.system = build_system(cfg)
        out.mkdir(parents=True, exist_ok=True)

    @cached_property
    def profile(self):
        return gaps(self.system.freqs)

    @cached_property
    def generator(self):
        return self.system.generator

    @cached_property
    def eigs(self):
        return full_spectrum(self.generator, self.cfg.analysis.trust_fraction)

    @cached_property
    def N0(self):
        if not self.profile.a1:
            raise HypothesisFailure(f"out of hypothesis: gap growth {self.profile.a1.status} "
                                    f"({self.profile.a1.evidence})")
        try:
            return compute_N0(self.profile, self.system.perturbation_norm, self.cfg.analysis.kappa)
        except ValueError as exc:
            raise HypothesisFailure(f"out of hypothesis: {exc}") from None

    @cached_property
    def contours(self):
        a = self.cfg.analysis
        return build_contours(self.system.freqs, self.N0, a.nodes_per_side, a.trust_fraction)

    @cached_property
    def entries(self):
        box, gammas = self.contours
        return cnt.analyze_contours(self.generator, box, gammas, self.eigs)


def cmd_check_assumptions(run: Run) -> int:
    p = run.profile
    rows = []
    for k in range(1, p.delta.size + 1):
        a2 = p.a2_terms[k - 1] if k - 1 < p.a2_terms.size else ""
        rows.append((k, p.delta[k - 1], a2))
    write_csv(run.out / "gaps.csv", ["k", "delta_k", "a2_term"], rows)
    update_report(run.out, "assumptions", {
        "family": p.family_tag,
        "a1": p.a1.status, "a1_evidence": p.a1.evidence,
        "a2": p.a2.status, "a2_evidence": p.a2.evidence,
    })
    return EXIT_OK


def cmd_spectrum(run: Run) -> int:
    eigs, system = run.eigs, run.system
    write_csv(run.out / "eigenvalues.csv", ["re", "im", "residual", "trusted"],
              zip(eigs.eigenvalues.real, eigs.eigenvalues.imag, eigs.residuals, eigs.trusted))
    mu, lam = spectral_abscissa(eigs)
    smin, smax, cond = frame_bounds(eigs)
    data = {
        "kind": system.kind,
        "abscissa": mu,
        "abscissa_eigenvalue": lam,
        "trust_limit": eigs.trust_limit,
        "max_residual": float(eigs.residuals.max()),
        "frame_bounds": {"sigma_min": smin, "sigma_max": smax, "cond": cond},
        "defective": eigs.defective,
    }
    code = EXIT_OK
    if system.kind == DISSIPATIVE:
        mu1 = system.freqs.mu[0]
        loc = localization_check(eigs, system.beta, mu1)
        data["beta"] = system.beta
        data["damping_regime"] = damping_regime(system.beta, mu1)
        data["localization"] = {"ok": loc.ok, "checked": loc.checked, "violations": loc.violations,
                                "strip": loc.strip, "interval": loc.interval}
        if system.damping is not None:
            rf = re_formula_check(eigs, system.damping, system.freqs)
            data["re_formula"] = {"re_deviation": rf.re_deviation, "modulus_deviation": rf.modulus_deviation,
                                  "min_modulus_ratio": rf.min_modulus_ratio, "ok": rf.ok()}
            code = EXIT_OK if rf.ok() else EXIT_NUMERICAL
        if not loc.ok:
            code = EXIT_NUMERICAL
    update_report(run.out, "spectrum", data)
    return code


def cmd_contours(run: Run) -> int:
    box, gammas = run.contours
    entries = run.entries
    gen, profile = run.generator, run.profile
    counts = cnt.count_all(gen, box, gammas, run.eigs, entries)
    diffs = cnt.projector_diff_norms(gen, gammas, profile, entries)
    extractions = {x.index: x for x in cnt.extract_all(gen, entries, run.eigs)}
    write_csv(run.out / "contours.csv", ["n", "kind", "re_min", "re_max", "im_min", "im_max"],
              [(c.index, c.kind, c.re_min, c.re_max, c.im_min, c.im_max) for c in [box] + list(gammas)])
    write_csv(run.out / "counts.csv", ["n", "kind", "projector_rank", "reference_rank", "direct_count"],
              [(r.index, r.kind, r.rank, r.rank_reference, r.direct_count) for r in counts.rows])
    rows = []
    for n, norm, bound in zip(diffs.indices, diffs.norms, diffs.bounds):
        x = extractions[int(n)]
        rows.append((int(n), norm, bound, x.closeness, x.phi_norm))
    write_csv(run.out / "projnorms.csv", ["n", "diff_norm", "bound", "closeness", "phi_norm"], rows)
    closeness = cnt.square_sum_report(diffs.indices, [extractions[int(n)].closeness for n in diffs.indices],
                                      diffs.bounds)
    rq = [x.rayleigh_error for x in extractions.values()]
    cover = True
    if run.system.kind == DISSIPATIVE:
        cover = verify_region_cover(box, gammas, run.system.beta, run.system.freqs.mu[0])
    update_report(run.out, "contours", {
        "N0": run.N0,
        "box_rank": counts.box_rank,
        "counts_consistent": counts.consistent,
        "rank_equality": counts.rank_equality_holds(),
        "fitted_C_projectors": diffs.constant,
        "fitted_C_closeness": closeness.constant,
        "tail_sum_projectors": diffs.tail_sum,
        "tail_sum_closeness": closeness.tail_sum,
        "max_rayleigh_error": max(rq) if rq else None,
        "region_covered": cover,
        "max_idempotency_residual": max(e.pb.idempotency_residual for e in entries),
    })
    if not counts.consistent:
        bad = [(r.index, r.rank, r.direct_count) for r in counts.rows if not r.agrees]
        log.error("projector rank disagrees with direct count: %s", bad)
        return EXIT_NUMERICAL
    return EXIT_OK


def _simulate(run: Run, seed: int):
    gen = run.generator
    mu, _ = spectral_abscissa(run.eigs)
    horizon = run.cfg.horizon or sg.choose_horizon(mu, run.system.freqs.mu[0])
    z0 = sg.generic_state(run.eigs, np.random.default_rng(seed))
    sim = run.cfg.simulation
    return sg.evolve(gen, z0, horizon, sim.samples, sim.method, run.eigs), mu


def _write_energy(run: Run, traj):
    diss = traj.dissipation if traj.dissipation is not None else np.full(traj.times.size, np.nan)
    write_csv(run.out / "energy.csv", ["t", "E", "dissipation"], zip(traj.times, traj.energies, diss))


def cmd_simulate(run: Run) -> int:
    traj, mu = _simulate(run, run.seeds[0])
    _write_energy(run, traj)
    data = {"seed": run.seeds[0], "method": traj.method_tag, "fallback": traj.fallback,
            "horizon": float(traj.times[-1]), "step": traj.step, "abscissa": mu}
    if traj.dissipation is not None and run.system.kind == DISSIPATIVE:
        data["energy_identity_residual"] = sg.energy_identity_check(traj)
    N0 = 2
    try:
        N0 = run.N0
    except HypothesisFailure:
        pass
    fit = sg.fit_decay_rate(traj, N0, mu)
    data["omega_est"] = fit.omega_est
    data["bound_constant"] = fit.bound_constant
    update_report(run.out, "simulation", data)
    return EXIT_OK


def cmd_verify(run: Run) -> int:
    """Assumptions, spectrum, contours, simulation and fit; writes verdict.json and energy.csv."""
    a = run.cfg.analysis
    rep = sg.verify_main_theorem(run.system, run.seeds, a.kappa, a.trust_fraction,
                                 run.cfg.simulation.samples, run.cfg.horizon)
    verdict = {"kind": rep.kind, "a1": rep.a1, "a2": rep.a2, "verdict": rep.verdict, "mu": rep.mu,
               "omega_est": rep.omega_est, "omega_estimates": rep.omega_estimates, "gap": rep.gap,
               "tolerance": None if rep.mu is None else sg.rate_tolerance(rep.mu), "N0": rep.N0,
               "horizon": rep.horizon, "bound_constants": rep.bound_constants,
               "path": "stiffness-perturbed" if rep.kind != DISSIPATIVE else "dissipative"}
    if rep.verdict == sg.OUT_OF_HYPOTHESIS:
        write_json(run.out / "verdict.json", verdict)
        print(sg.OUT_OF_HYPOTHESIS)
        return EXIT_HYPOTHESIS
    try:
        counts = cnt.count_all(run.generator, *run.contours, run.eigs, run.entries)
    except Exception as exc:  # noqa: BLE001 - reported with the stage name
        raise StageError("contours", exc) from exc
    verdict["counts_consistent"] = counts.consistent
    try:
        traj, _ = _simulate(run, run.seeds[0]) if run.cfg.simulation.method == sg.RK4 else (
            rep.trajectories[0], None)
    except Exception as exc:  # noqa: BLE001
        raise StageError("simulate", exc) from exc
    _write_energy(run, traj)
    write_json(run.out / "verdict.json", verdict)
    print(rep.verdict)
    return EXIT_OK if rep.holds and counts.consistent else EXIT_NUMERICAL


def cmd_report(run: Run) -> int:
    codes = [cmd_check_assumptions(run), cmd_spectrum(run)]
    for cmd in (cmd_contours, cmd_simulate, cmd_verify):
        try:
            codes.append(cmd(run))
        except HypothesisFailure as exc:
            log.warning("%s", exc)
            codes.append(EXIT_HYPOTHESIS)
    return max(codes)


COMMANDS = {
    "check-assumptions": cmd_check_assumptions,
    "spectrum": cmd_spectrum,
    "contours": cmd_contours,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specdecay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="single seed overriding simulation.seeds")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg._base_dir / cfg.output_dir
        run = Run(cfg, out, None if args.seed is None else [args.seed])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](run)
    except HypothesisFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_HYPOTHESIS
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERICAL
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"stage {args.command!r} failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
