"""Time evolution ``z(t) = exp(G t) z0``, energy bookkeeping and decay-rate fits.

Rates follow the convention ``E(t) <= C exp(2 omega t) E(0)``: they are
non-positive for dissipative systems and more negative means faster decay.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .gaps import compute_N0, gaps
from .modal import GeneratorMatrix, System
from .spectrum import EigenSet, full_spectrum, spectral_abscissa, DEFECTIVE_COND

log = logging.getLogger(__name__)

EIGEN, RK4 = "eigen-expansion", "rk4"


@dataclass
class EnergyTrajectory:
    times: np.ndarray
    energies: np.ndarray
    dissipation: Optional[np.ndarray]
    method_tag: str
    step: Optional[float] = None
    fallback: bool = False
    states: Optional[np.ndarray] = field(default=None, repr=False)


def _rk4_increment(g: np.ndarray, h: float) -> np.ndarray:
    """``M - I`` for the classical RK4 step ``M`` of ``z' = G z``.

    ``M`` is the degree-4 Taylor polynomial of ``hG``; keeping ``M - I``
    instead of ``M`` avoids rounding the small increment against the identity.
    """
    eye = np.eye(g.shape[0])
    x = h * g
    return x @ (eye + x @ (eye + x @ (eye + x / 4) / 3) / 2)


def _rk4_block(g: np.ndarray, weight: np.ndarray, h: float, doublings: int):
    """Map over ``2**doublings`` RK4 steps and the trapezoid-rule dissipation form.

    Returns ``(M, T)`` with ``z_end = M z_start`` and the dissipation over the
    block equal to ``Re(z_start^H T z_start)``.
    """
    inc = _rk4_increment(g, h)
    acc = weight.copy()  # sum over i < 2^j of (M^i)^T W M^i
    for _ in range(doublings):
        acc = 2 * acc + inc.T @ acc + acc @ inc + inc.T @ acc @ inc
        inc = 2 * inc + inc @ inc
    power = np.eye(g.shape[0]) + inc
    trap = h * (acc - 0.5 * weight + 0.5 * power.T @ weight @ power)
    return power, trap


def _rk4_run(g, weight, z0, dt, samples, doublings):
    power, trap = _rk4_block(g, weight, dt / 2 ** doublings, doublings)
    states = np.empty((samples, z0.size), dtype=z0.dtype)
    diss = np.zeros(samples)
    z = z0
    states[0] = z
    for j in range(1, samples):
        diss[j] = diss[j - 1] + float(np.vdot(z, trap @ z).real)
        z = power @ z
        states[j] = z
    return states, diss


def evolve(gen: GeneratorMatrix, z0, horizon: float, samples: int = 2001, method: str = EIGEN,
           eigs: Optional[EigenSet] = None, richardson_tol: float = 1e-10, max_doublings: int = 40) -> EnergyTrajectory:
    """Sample ``E(t)`` on ``samples`` equispaced times in ``[0, horizon]``.

    ``eigen-expansion`` uses ``Phi exp(Lambda t) Phi^{-1} z0``; when the
    eigenbasis is (nearly) defective the call falls back to ``rk4`` and sets
    ``fallback``.  ``rk4`` uses a fixed step ``h <= 0.1/sqrt(mu_N)`` that is
    halved until halving again moves ``E(T)`` by less than ``richardson_tol``
    (relative).  Its sample-to-sample map is the RK4 step matrix raised to a
    power of two by repeated squaring, and the dissipation integral is the
    composite trapezoid rule over every RK4 step.
    """
    z0 = np.asarray(getattr(z0, "z", z0))
    times = np.linspace(0.0, horizon, samples)
    fallback = False
    if method == EIGEN:
        if eigs is None:
            eigs = full_spectrum(gen)
        if eigs.cond_estimate <= DEFECTIVE_COND:
            phi, lams = eigs.eigenvectors, eigs.eigenvalues
            coef = np.linalg.solve(phi, z0.astype(complex))
            states = (phi @ (coef[:, None] * np.exp(np.outer(lams, times)))).T
            if np.isrealobj(z0):
                states = states.real
            energies = 0.5 * np.sum(np.abs(states) ** 2, axis=1)
            return EnergyTrajectory(times, energies, None, EIGEN, states=states)
        log.warning("eigenbasis condition %.3g too large; falling back to rk4", eigs.cond_estimate)
        fallback = True
    elif method != RK4:
        raise ValueError(f"unknown method {method!r}")

    g = gen.g
    n = gen.n_modes
    weight = np.zeros_like(g)
    if gen.d is not None:
        weight[n:, n:] = gen.d
    dt = horizon / (samples - 1)
    h_max = 0.1 / gen.sqrt_mu[-1]
    p = max(0, math.ceil(math.log2(dt / h_max)))
    run = _rk4_run(g, weight, z0, dt, samples, p)
    e_prev = 0.5 * np.vdot(run[0][-1], run[0][-1]).real
    change_prev = np.inf
    for _ in range(max_doublings):
        nxt = _rk4_run(g, weight, z0, dt, samples, p + 1)
        e_next = 0.5 * np.vdot(nxt[0][-1], nxt[0][-1]).real
        change = abs(e_next - e_prev) / abs(e_next)
        if change <= richardson_tol:
            run, p = nxt, p + 1
            break
        if change >= change_prev:
            # rounding now dominates truncation; keep the coarser run
            log.warning("rk4 Richardson change stalled at %.2e (tolerance %.1e)", change, richardson_tol)
            break
        run, p, e_prev, change_prev = nxt, p + 1, e_next, change
    states, diss = run
    energies = 0.5 * np.sum(np.abs(states) ** 2, axis=1)
    return EnergyTrajectory(times, energies, diss if gen.d is not None else np.zeros(samples), RK4,
                            step=dt / 2 ** p, fallback=fallback, states=states)


def energy_identity_check(traj: EnergyTrajectory) -> float:
    """``max_t |E(0) - E(t) - dissipated(t)| / E(0)``."""
    if traj.dissipation is None:
        raise ValueError("trajectory carries no dissipation record (use rk4)")
    e0 = traj.energies[0]
    return float(np.max(np.abs(e0 - traj.energies - traj.dissipation)) / e0)


@dataclass
class DecayFit:
    omega_est: float
    bound_constant: Optional[float]
    window: tuple


def fit_decay_rate(traj: EnergyTrajectory, N0: int, mu: Optional[float] = None,
                   noise_floor: float = 1e-24) -> DecayFit:
    """Half the least-squares slope of ``log E`` over the second half of the horizon.

    Samples below ``noise_floor * E(0)`` are dropped by shortening the
    horizon.  With ``mu`` given, also returns
    ``max E(t) exp(-2 mu t) / ((1 + t^(2 N0)) E(0))``.
    """
    t, e = traj.times, traj.energies
    e0 = e[0]
    if e0 <= 0:
        raise ValueError("initial energy must be positive")
    alive = np.flatnonzero(e > noise_floor * e0)
    end = t[alive[-1]]
    if end < t[-1]:
        log.info("energy hits float noise at t=%.4g; fitting on the shortened horizon", end)
    sel = (t >= 0.5 * end) & (t <= end)
    slope = np.polyfit(t[sel], np.log(e[sel]), 1)[0]
    const = None
    if mu is not None:
        keep = t <= end
        tk = t[keep]
        with np.errstate(over="ignore"):
            const = float(np.max(e[keep] * np.exp(-2 * mu * tk) / ((1 + tk ** (2 * N0)) * e0)))
    return DecayFit(0.5 * float(slope), const, (0.5 * end, end))


def choose_horizon(mu: float, mu1: float, target: float = 1e-6, neutral_periods: float = 1000.0) -> float:
    """Horizon with ``exp(2 mu T) = target``; ``neutral_periods / sqrt(mu1)`` when ``mu`` is ~0."""
    if mu < -1e-9:
        return math.log(1 / target) / (-2 * mu)
    return neutral_periods / math.sqrt(mu1)


def generic_state(eigs: EigenSet, rng: np.random.Generator, n_active: Optional[int] = None,
                  floor: float = 1e-3, tries: int = 200) -> np.ndarray:
    """Random real unit state whose trusted eigen-components all exceed ``floor``.

    Only the lowest ``n_active`` undamped modes (default: the trusted half)
    are populated.
    """
    n = eigs.sqrt_mu.size
    if n_active is None:
        n_active = max(1, int(np.count_nonzero(eigs.sqrt_mu <= eigs.trust_limit)))
    for _ in range(tries):
        z = np.zeros(2 * n)
        z[:n_active] = rng.standard_normal(n_active)
        z[n:n + n_active] = rng.standard_normal(n_active)
        z /= np.linalg.norm(z)
        coef = np.linalg.solve(eigs.eigenvectors, z.astype(complex))
        if np.all(np.abs(coef[eigs.trusted]) >= floor):
            return z
    raise RuntimeError("could not draw a generic initial state")


EQUAL = "equality within tolerance"
OUT_OF_HYPOTHESIS = "out of hypothesis"
INEQUALITY_VIOLATED = "inequality violated"
NOT_ATTAINED = "equality not attained"


@dataclass
class TheoremReport:
    kind: str
    verdict: str
    a1: str
    a2: str
    mu: Optional[float] = None
    abscissa_eigenvalue: Optional[complex] = None
    omega_estimates: List[float] = field(default_factory=list)
    N0: Optional[int] = None
    horizon: Optional[float] = None
    bound_constants: List[float] = field(default_factory=list)
    trajectories: List[EnergyTrajectory] = field(default_factory=list, repr=False)

    @property
    def omega_est(self) -> Optional[float]:
        return float(np.mean(self.omega_estimates)) if self.omega_estimates else None

    @property
    def gap(self) -> Optional[float]:
        if not self.omega_estimates:
            return None
        return float(max(abs(w - self.mu) for w in self.omega_estimates))

    @property
    def holds(self) -> bool:
        return self.verdict == EQUAL


def rate_tolerance(mu: float) -> float:
    return max(0.02 * abs(mu), 1e-3)


def verify_main_theorem(system: System, seeds: Sequence[int] = (0, 1, 2, 3, 4), kappa: float = 0.5,
                        trust_fraction: float = 0.5, samples: int = 2001,
                        horizon: Optional[float] = None) -> TheoremReport:
    """Compare the fitted decay rate of generic solutions with the spectral abscissa.

    Requires growing, square-summably separated gaps; otherwise the verdict
    is ``out of hypothesis``.  For every seed the fitted rate must satisfy
    ``omega >= mu - 1e-3`` and ``|omega - mu| <= max(0.02 |mu|, 1e-3)``.
    """
    profile = gaps(system.freqs)
    report = TheoremReport(system.kind, OUT_OF_HYPOTHESIS, profile.a1.status, profile.a2.status)
    if not (profile.a1 and profile.a2):
        return report
    gen = system.generator
    try:
        report.N0 = compute_N0(profile, system.perturbation_norm, kappa)
    except ValueError:
        return report
    eigs = full_spectrum(gen, trust_fraction)
    mu, lam = spectral_abscissa(eigs)
    report.mu, report.abscissa_eigenvalue = mu, lam
    report.horizon = horizon if horizon is not None else choose_horizon(mu, system.freqs.mu[0])
    tol = rate_tolerance(mu)
    ok_ineq = ok_eq = True
    for seed in seeds:
        z0 = generic_state(eigs, np.random.default_rng(seed))
        traj = evolve(gen, z0, report.horizon, samples, EIGEN, eigs)
        fit = fit_decay_rate(traj, report.N0, mu)
        report.omega_estimates.append(fit.omega_est)
        report.bound_constants.append(fit.bound_constant)
        report.trajectories.append(traj)
        ok_ineq &= fit.omega_est >= mu - 1e-3
        ok_eq &= abs(fit.omega_est - mu) <= tol
    report.verdict = EQUAL if ok_ineq and ok_eq else (INEQUALITY_VIOLATED if not ok_ineq else NOT_ATTAINED)
    return report
