"""Built-in modal systems: hinged and clamped-free beams, the vibrating string.

The hinged beam on (0, 1) has eigenfunctions ``sqrt(2) sin(k pi x)`` and
``mu_k = (k pi)^4``, so damping by a multiplication operator and an axial
force both have closed-form modal matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .modal import Frequencies, ModalDamping, StiffnessPerturbation


@dataclass(frozen=True)
class DampingSpec:
    """Damping coefficient ``a(x)``: constant ``a0`` or ``c`` on ``(alpha, beta)``."""

    kind: str
    a0: Optional[float] = None
    c: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.a0 is None or self.a0 < 0:
                raise ValueError("constant damping needs a0 >= 0")
        elif self.kind == "indicator":
            if self.c is None or self.c < 0:
                raise ValueError("indicator damping needs c >= 0")
            if self.alpha is None or self.beta is None or not 0 <= self.alpha < self.beta <= 1:
                raise ValueError("indicator damping needs 0 <= alpha < beta <= 1")
        else:
            raise ValueError(f"unknown damping kind {self.kind!r}")

    def build(self, freqs: Frequencies) -> ModalDamping:
        if self.kind == "constant":
            return constant_damping(freqs.n, self.a0)
        return indicator_damping(freqs, self.c, self.alpha, self.beta)


def _check_n(n):
    if int(n) != n or n < 3:
        raise ValueError(f"need at least 3 modes, got {n}")
    return int(n)


def hinged_beam(n: int) -> Frequencies:
    k = np.arange(1, _check_n(n) + 1, dtype=float)
    return Frequencies((k * np.pi) ** 4, "hinged-beam")


def wave_string(n: int) -> Frequencies:
    """Fixed string: ``mu_k = (k pi)^2``, constant gaps ``pi``."""
    k = np.arange(1, _check_n(n) + 1, dtype=float)
    return Frequencies((k * np.pi) ** 2, "wave")


def _clamped_free_residual(b):
    # cos(b) cosh(b) + 1 divided by cosh(b); the unscaled form overflows for large b
    return np.cos(b) + 1.0 / np.cosh(b)


def clamped_free_roots(n: int) -> np.ndarray:
    """First ``n`` positive roots of ``cos(b) cosh(b) = -1``."""
    roots = np.empty(n)
    for k in range(1, n + 1):
        lo, hi = (k - 1) * np.pi, k * np.pi
        try:
            roots[k - 1] = optimize.bisect(_clamped_free_residual, lo, hi, xtol=1e-13, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise RuntimeError(f"clamped-free root {k} not bracketed in [{lo}, {hi}]") from exc
    return roots


def clamped_free_beam(n: int) -> Frequencies:
    """Cantilever beam of unit length: ``mu_k = b_k^4``."""
    return Frequencies(clamped_free_roots(_check_n(n)) ** 4, "clamped-free-beam")


def constant_damping(n: int, a0: float) -> ModalDamping:
    """``a(x) = a0``: modal damping ``2 a0 I``."""
    if a0 < 0:
        raise ValueError("a0 must be nonnegative")
    return ModalDamping(2.0 * a0 * np.eye(n))


def indicator_damping(freqs: Frequencies, c: float, alpha: float, beta: float) -> ModalDamping:
    """Modal matrix of ``2 a`` with ``a = c`` on ``(alpha, beta)``, zero elsewhere.

    Entries are ``4c * int_alpha^beta sin(j pi x) sin(k pi x) dx`` evaluated
    from the antiderivative.
    """
    if freqs.family_tag != "hinged-beam":
        raise ValueError(
            f"closed-form indicator damping needs hinged-beam modes, got {freqs.family_tag!r}; "
            "supply a custom damping matrix instead")
    if c < 0 or not 0 <= alpha < beta <= 1:
        raise ValueError("need c >= 0 and 0 <= alpha < beta <= 1")
    n = freqs.n
    j = np.arange(1, n + 1)[:, None]
    k = np.arange(1, n + 1)[None, :]
    diff = j - k
    summ = j + k
    safe = np.where(diff == 0, 1, diff)

    def prim(x):
        off = np.sin(diff * np.pi * x) / (safe * np.pi)
        on = x
        return 2 * c * (np.where(diff == 0, on, off) - np.sin(summ * np.pi * x) / (summ * np.pi))

    return ModalDamping(prim(beta) - prim(alpha))


def axial_force_stiffness(freqs: Frequencies, p: float) -> StiffnessPerturbation:
    """Axial load ``p u_xx`` on the hinged beam: ``K = diag(-p (k pi)^2)``."""
    if freqs.family_tag != "hinged-beam":
        raise ValueError("closed-form axial force needs hinged-beam modes")
    if p < 0:
        raise ValueError("axial force p must be nonnegative")
    if p >= np.pi ** 2:
        raise ValueError(f"p = {p} >= pi^2 makes A + K lose positivity")
    k = np.arange(1, freqs.n + 1)
    return StiffnessPerturbation.from_matrix(np.diag(-p * (k * np.pi) ** 2), freqs)
