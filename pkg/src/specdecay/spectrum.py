"""Dense eigen-analysis of the truncated generator."""
from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.linalg as la

from .modal import Frequencies, GeneratorMatrix, ModalDamping, StiffnessPerturbation

log = logging.getLogger(__name__)

DEFECTIVE_COND = 1e8


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenSet:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    cond_estimate: float
    trusted: np.ndarray
    trust_limit: float
    sqrt_mu: np.ndarray

    @property
    def defective(self) -> bool:
        return not np.isfinite(self.cond_estimate) or self.cond_estimate > DEFECTIVE_COND

    @property
    def trusted_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.trusted]

    def position_block(self, j: int) -> np.ndarray:
        """Position component ``u = S^{-1} z_1`` of eigenvector ``j``."""
        n = self.sqrt_mu.size
        return self.eigenvectors[:n, j] / self.sqrt_mu


def trust_limit(sqrt_mu: np.ndarray, trust_fraction: float = 0.5) -> float:
    k = max(int(np.floor(trust_fraction * sqrt_mu.size)), 1)
    return float(sqrt_mu[k - 1])


def _is_normal(g):
    scale = np.linalg.norm(g, 1) ** 2
    return np.linalg.norm(g.T @ g - g @ g.T, 1) <= 1e-13 * max(scale, 1.0)


def full_spectrum(gen: GeneratorMatrix, trust_fraction: float = 0.5) -> EigenSet:
    """All eigenpairs of ``G`` with unit-norm eigenvectors, sorted by (Im, Re).

    Normal generators (no damping) go through the complex Schur form, whose
    unitary factor is an exactly orthonormal eigenbasis.
    """
    g = gen.g
    try:
        if _is_normal(g):
            t, vecs = la.schur(g.astype(complex), output="complex")
            lams = np.diag(t).copy()
        else:
            lams, vecs = la.eig(g)
    except (la.LinAlgError, ValueError) as exc:
        fd, path = tempfile.mkstemp(prefix="generator-", suffix=".npy")
        os.close(fd)
        np.save(path, g)
        raise SpectrumError(f"eigensolver failed ({exc}); matrix dumped to {path}") from exc
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    order = np.lexsort((lams.real, lams.imag))
    lams, vecs = lams[order], vecs[:, order]
    residuals = np.linalg.norm(g @ vecs - vecs * lams, axis=0)
    sv = np.linalg.svd(vecs, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    limit = trust_limit(gen.sqrt_mu, trust_fraction)
    trusted = np.abs(lams.imag) <= limit * (1 + 1e-12)
    if cond > DEFECTIVE_COND:
        log.warning("eigenvector matrix condition %.3g: defective or nearly defective cluster", cond)
    return EigenSet(lams, vecs, residuals, cond, trusted, limit, gen.sqrt_mu)


def qep_residual(lam: complex, u, freqs: Frequencies, damping: Optional[ModalDamping] = None,
                 stiffness: Optional[StiffnessPerturbation] = None) -> float:
    """Scaled residual of ``lam^2 u + lam D u + (diag(mu) + K) u``."""
    u = np.asarray(u, dtype=complex)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ValueError("zero vector has no eigenvalue residual")
    r = lam * lam * u + freqs.mu * u
    if damping is not None:
        r = r + lam * (damping.d @ u)
    if stiffness is not None:
        r = r + stiffness.k @ u
    return float(np.linalg.norm(r) / (abs(lam) ** 2 * nu + np.linalg.norm(freqs.mu * u)))


@dataclass
class LocalizationReport:
    checked: int
    violations: List[complex]
    strip: tuple
    interval: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def enclosure(beta: float, mu1: float):
    """Left strip ``(-beta, 0)`` and real interval ``[-beta - r, r]``."""
    r = np.sqrt(max(beta * beta - mu1, 0.0))
    return (-beta, 0.0), (-beta - r, r)


def localization_check(eigs: EigenSet, beta: float, mu1: float) -> LocalizationReport:
    """Trusted eigenvalues must lie in the strip (with ``|z| >= sqrt(mu1)``) or on the real interval."""
    strip, interval = enclosure(beta, mu1)
    bad = []
    lams = eigs.trusted_eigenvalues
    for lam in lams:
        slack = 1e-8 * (1 + abs(lam))
        in_strip = (abs(lam) >= np.sqrt(mu1) - slack and strip[0] - slack <= lam.real <= slack)
        in_interval = abs(lam.imag) <= slack and interval[0] - slack <= lam.real <= interval[1] + slack
        if not (in_strip or in_interval):
            bad.append(complex(lam))
    return LocalizationReport(lams.size, bad, strip, interval)


@dataclass
class ReFormulaReport:
    re_deviation: float
    modulus_deviation: float
    min_modulus_ratio: float
    checked: int

    def ok(self, tol: float = 1e-7) -> bool:
        return max(self.re_deviation, self.modulus_deviation) < tol and self.min_modulus_ratio >= 1 - 1e-9


def re_formula_check(eigs: EigenSet, damping: ModalDamping, freqs: Frequencies) -> ReFormulaReport:
    """Compare non-real eigenvalues with the Rayleigh quotients of their position block.

    For an eigenpair, ``Re lam = -<Du,u>/(2|u|^2)`` and ``|lam|^2 = <Au,u>/|u|^2``.
    Deviations are scaled by ``1 + |lam|^2``.
    """
    re_dev = mod_dev = 0.0
    ratio = np.inf
    count = 0
    for j in np.flatnonzero(eigs.trusted):
        lam = eigs.eigenvalues[j]
        if abs(lam.imag) <= 1e-8 * (1 + abs(lam)):
            continue
        u = eigs.position_block(j)
        uu = np.vdot(u, u).real
        du = np.vdot(u, damping.d @ u).real / uu
        au = np.vdot(u, freqs.mu * u).real / uu
        scale = 1 + abs(lam) ** 2
        re_dev = max(re_dev, abs(lam.real + 0.5 * du) / scale)
        mod_dev = max(mod_dev, abs(abs(lam) ** 2 - au) / scale)
        ratio = min(ratio, abs(lam) ** 2 / freqs.mu[0])
        count += 1
    return ReFormulaReport(re_dev, mod_dev, float(ratio), count)


def spectral_abscissa(eigs: EigenSet):
    """``(max Re lam, attaining lam)`` over trusted eigenvalues."""
    lams = eigs.trusted_eigenvalues
    if lams.size == 0:
        raise ValueError("no trusted eigenvalues")
    j = int(np.argmax(lams.real))
    return float(lams[j].real), complex(lams[j])


def frame_bounds(eigs: EigenSet):
    """Extreme singular values of the unit-column eigenvector matrix and their ratio."""
    if eigs.defective:
        log.warning("frame bounds of a (nearly) defective eigenbasis are unreliable")
    sv = np.linalg.svd(eigs.eigenvectors, compute_uv=False)
    return float(sv[-1]), float(sv[0]), float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")


def doubling_drift(coarse: EigenSet, fine: EigenSet) -> float:
    """Largest relative move of a trusted eigenvalue when the truncation grows."""
    ref = fine.eigenvalues
    drift = 0.0
    for lam in coarse.trusted_eigenvalues:
        drift = max(drift, np.min(np.abs(ref - lam)) / max(abs(lam), 1.0))
    return float(drift)


def damping_regime(beta: float, mu1: float) -> str:
    """'under' or 'over' damping, comparing ``beta`` with ``sqrt(mu1)``."""
    return "over" if beta > np.sqrt(mu1) else "under"
