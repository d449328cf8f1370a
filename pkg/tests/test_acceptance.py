"""Acceptance gate: ten criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary.
"""
import json

import numpy as np
import pytest

from conftest import ACCEPTANCE, PI2, PI4, eigs, modal_roots, pipeline, system
from specdecay import contour as cnt
from specdecay import semigroup as sg
from specdecay.cli import EXIT_HYPOTHESIS, main
from specdecay.families import wave_string
from specdecay.gaps import FAILS, gaps
from specdecay.spectrum import frame_bounds, full_spectrum, localization_check, re_formula_check, spectral_abscissa

DAMPED = ("a0=0", "a0=1", "a0=15", "indicator")


@pytest.fixture
def record(request):
    """record(number, ok, detail) stores the line and asserts."""
    def _record(number, ok, detail):
        name = request.node.name
        ACCEPTANCE[number] = (bool(ok), f"{name}: {detail}")
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return _record


def nearest_rel(lams, oracle):
    return max(np.min(np.abs(oracle - lam)) / abs(lam) for lam in lams)


def test_01_oracle_spectrum(record):
    expected = {0.0: 0.0, 1.0: -1.0, 15.0: -15 + np.sqrt(225 - PI4)}
    worst, abs_err = 0.0, 0.0
    for a0, mu in expected.items():
        e = eigs(f"a0={a0:g}", 64)
        worst = max(worst, nearest_rel(e.trusted_eigenvalues, modal_roots(a0, 64)))
        abs_err = max(abs_err, abs(spectral_abscissa(e)[0] - mu))
    record(1, worst < 1e-8 and abs_err < 1e-8,
           f"max relative eigenvalue error {worst:.2e} (< 1e-8), max abscissa error {abs_err:.2e}")


def test_02_rate_equals_abscissa(record):
    parts, ok = [], True
    for cfg in ("a0=1", "indicator"):
        rep = sg.verify_main_theorem(system(cfg, 64), seeds=range(5))
        tol = max(0.02 * abs(rep.mu), 1e-3)
        eq = all(abs(w - rep.mu) <= tol for w in rep.omega_estimates)
        ineq = all(w >= rep.mu - 1e-3 for w in rep.omega_estimates)
        ok &= eq and ineq and rep.verdict == sg.EQUAL
        parts.append(f"{cfg}: mu={rep.mu:.6f} omega={rep.omega_est:.6f} gap={rep.gap:.2e} tol={tol:.1e}")
    record(2, ok, "; ".join(parts))


def test_03_counting(record):
    s = system("a0=1", 64)
    N0, box, gammas, entries = pipeline("a0=1", 64)
    rep = cnt.count_all(s.generator, box, gammas, eigs("a0=1", 64), entries)
    gamma_ranks = {r.rank for r in rep.rows if r.kind == "gamma"}
    ok = N0 == 2 and rep.box_rank == 4 and gamma_ranks == {1} and rep.consistent
    record(3, ok, f"N0={N0}, box rank {rep.box_rank}, gamma ranks {sorted(gamma_ranks)} over {len(gammas)} "
                  f"rectangles, ranks equal direct counts: {rep.consistent}")


def _shape(cfg, n):
    s = system(cfg, n)
    _, _, gammas, entries = pipeline(cfg, n)
    prof = gaps(s.freqs)
    diffs = cnt.projector_diff_norms(s.generator, gammas, prof, entries)
    ex = {x.index: x for x in cnt.extract_all(s.generator, entries)}
    close = cnt.square_sum_report(diffs.indices, [ex[int(i)].closeness for i in diffs.indices], diffs.bounds)
    return diffs, close


def test_04_projector_shape(record):
    parts, ok = [], True
    for cfg in ("a0=1", "indicator"):
        d64, c64 = _shape(cfg, 64)
        d128, c128 = _shape(cfg, 128)
        for label, a, b in (("P", d64, d128), ("phi", c64, c128)):
            drift = abs(b.constant / a.constant - 1)
            tail = max(a.tail_sum, b.tail_sum)
            ok &= drift <= 0.2 and tail < 1e-3
            parts.append(f"{cfg} {label}: C {a.constant:.4f}->{b.constant:.4f} ({100 * drift:.1f}%), tail {tail:.1e}")
    record(4, ok, "; ".join(parts))


def test_05_eigenpair_identities(record):
    worst_re = worst_mod = 0.0
    min_ratio, ok = np.inf, True
    for cfg in DAMPED:
        s = system(cfg, 64)
        e = eigs(cfg, 64)
        rep = re_formula_check(e, s.damping, s.freqs)
        worst_re, worst_mod = max(worst_re, rep.re_deviation), max(worst_mod, rep.modulus_deviation)
        min_ratio = min(min_ratio, rep.min_modulus_ratio)
        ok &= rep.ok(1e-7)
        # every eigenvalue of the truncation, not only the trusted ones
        ok &= localization_check(full_spectrum(s.generator, trust_fraction=1.0), s.beta, PI4).ok
    record(5, ok, f"scaled Re deviation {worst_re:.1e}, |lam|^2 deviation {worst_mod:.1e} (< 1e-7), "
                  f"min |lam|^2/mu1 {min_ratio:.6f}, all eigenvalues in enclosure: {ok}")


def test_06_energy_identity(record):
    parts, ok = [], True
    for cfg in ("a0=1", "a0=15", "indicator"):
        e = eigs(cfg, 64)
        h = sg.choose_horizon(spectral_abscissa(e)[0], PI4)
        tr = sg.evolve(system(cfg, 64).generator, sg.generic_state(e, np.random.default_rng(0)), h, 2001, sg.RK4)
        res = sg.energy_identity_check(tr)
        ok &= res <= 1e-6
        parts.append(f"{cfg} {res:.1e}")
    e0 = eigs("undamped", 64)
    tr = sg.evolve(system("undamped", 64).generator, sg.generic_state(e0, np.random.default_rng(0)),
                   sg.choose_horizon(0.0, PI4), 2001, sg.RK4)
    drift = float(np.abs(tr.energies / tr.energies[0] - 1).max())
    ok &= drift <= 1e-10
    record(6, ok, f"identity residual / E(0): {', '.join(parts)} (<= 1e-6); D=0 drift {drift:.1e} "
                  f"over T={tr.times[-1]:.1f} (<= 1e-10)")


def test_07_riesz_conditioning(record):
    parts, ok = [], True
    for cfg in ("a0=1", "indicator"):
        c64, c128 = eigs(cfg, 64).cond_estimate, eigs(cfg, 128).cond_estimate
        change = abs(c128 / c64 - 1)
        ok &= change < 0.1
        parts.append(f"{cfg} cond {c64:.6f}->{c128:.6f} ({100 * change:.2e}%)")
    c0 = frame_bounds(eigs("undamped", 64))[2]
    ok &= abs(c0 - 1) <= 1e-10
    record(7, ok, "; ".join(parts) + f"; D=0 cond - 1 = {c0 - 1:.1e}")


def test_08_negative_control(record, tmp_path, capsys):
    prof = gaps(wave_string(64))
    cfg = tmp_path / "wave.json"
    cfg.write_text(json.dumps({"system": {"family": "wave", "n_modes": 64,
                                          "damping": {"kind": "constant", "a0": 1.0}}}))
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path / "out")])
    printed = capsys.readouterr().out
    verdict = json.loads((tmp_path / "out" / "verdict.json").read_text())["verdict"]
    ok = (prof.a1.status == FAILS and prof.a2.status == FAILS and code == EXIT_HYPOTHESIS
          and verdict == "out of hypothesis" and "out of hypothesis" in printed)
    record(8, ok, f"A1 {prof.a1.status}, A2 {prof.a2.status}, exit code {code}, verdict '{verdict}'")


def test_09_axial_force(record, tmp_path):
    e = eigs("p=1", 64)
    k = np.arange(1, 65)
    w = np.sqrt(k ** 4 * PI4 - k ** 2 * PI2)
    oracle = np.concatenate([1j * w, -1j * w])
    err = nearest_rel(e.trusted_eigenvalues, oracle)
    rep = sg.verify_main_theorem(system("p=1", 64))
    cfg = tmp_path / "axial.json"
    cfg.write_text(json.dumps({"system": {"family": "hinged-beam", "n_modes": 64, "stiffness": {"p": 1.0}}}))
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path / "out")])
    v = json.loads((tmp_path / "out" / "verdict.json").read_text())
    ok = (err < 1e-8 and rep.kind == "stiffness-perturbed" and abs(rep.mu) <= 1e-3
          and abs(rep.omega_est) <= 1e-3 and rep.verdict == sg.EQUAL and code == 0
          and v["path"] == "stiffness-perturbed")
    record(9, ok, f"max relative eigenvalue error {err:.1e} (< 1e-8), path {rep.kind}, mu={rep.mu:.1e}, "
                  f"omega={rep.omega_est:.1e} (|.| <= 1e-3)")


def test_10_cross_validation(record):
    agree, rq = 0.0, 0.0
    for cfg in ("a0=1", "indicator"):
        e = eigs(cfg, 64)
        gen = system(cfg, 64).generator
        h = sg.choose_horizon(spectral_abscissa(e)[0], PI4)
        z0 = sg.generic_state(e, np.random.default_rng(1))
        a = sg.evolve(gen, z0, h, 2001, sg.EIGEN, e)
        b = sg.evolve(gen, z0, h, 2001, sg.RK4)
        agree = max(agree, float(np.abs(a.energies / b.energies - 1).max()))
        _, _, _, entries = pipeline(cfg, 64)
        rq = max(rq, max(x.rayleigh_error for x in cnt.extract_all(gen, entries, e)))
    record(10, agree <= 1e-6 and rq <= 1e-8,
           f"eigen vs rk4 max relative energy difference {agree:.1e} (<= 1e-6); "
           f"max |Rayleigh quotient - eigenvalue| {rq:.1e} (<= 1e-8)")
