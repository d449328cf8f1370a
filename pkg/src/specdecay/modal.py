"""Truncated modal representation of a damped second-order system.

The state ``(x, v)`` of ``x'' + A x + D x' = 0`` (or ``x'' + (A + K) x = 0``)
is stored in energy coordinates ``z = (A^{1/2} x, v)``, in which the energy
norm is the Euclidean norm.  With ``S = diag(sqrt(mu))`` the first-order
generator satisfies ``z' = G z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FAMILIES = ("hinged-beam", "wave", "clamped-free-beam", "custom")
DISSIPATIVE = "dissipative"
STIFFNESS = "stiffness-perturbed"


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Frequencies:
    """Ascending eigenvalues ``mu_k`` of the stiffness operator, k = 1..N."""

    mu: np.ndarray
    family_tag: str = "custom"

    def __post_init__(self):
        mu = _frozen(self.mu)
        if mu.ndim != 1 or mu.size < 3:
            raise ValueError("need at least 3 frequencies")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise ValueError("frequencies must be finite and strictly positive")
        if np.any(np.diff(mu) < 0):
            raise ValueError("frequencies must be non-decreasing")
        if self.family_tag not in FAMILIES:
            raise ValueError(f"unknown family_tag {self.family_tag!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sqrt_mu", _frozen(np.sqrt(mu)))

    sqrt_mu: np.ndarray = field(init=False, repr=False)

    @property
    def n(self) -> int:
        return self.mu.size

    def truncate(self, n: int) -> "Frequencies":
        return Frequencies(self.mu[:n], self.family_tag)


@dataclass(frozen=True)
class ModalDamping:
    """Matrix of ``BB*`` in the eigenbasis of ``A``.

    ``bstar_norm_sq`` is ``||B*||^2 = ||BB*||_2`` and ``beta`` is half of it.
    """

    d: np.ndarray
    bstar_norm_sq: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("damping matrix must be square")
        scale = max(np.abs(d).max(initial=0.0), 1.0)
        if np.abs(d - d.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("damping matrix must be symmetric")
        d = 0.5 * (d + d.T)
        w = np.linalg.eigvalsh(d)
        norm = float(np.abs(w).max(initial=0.0))
        if w.size and w[0] < -1e-10 * max(norm, 1e-300):
            raise ValueError(f"damping matrix is not positive semidefinite (min eig {w[0]:.3e})")
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "bstar_norm_sq", norm)
        object.__setattr__(self, "beta", 0.5 * norm)

    @property
    def n(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True)
class StiffnessPerturbation:
    """Matrix of a lower-order stiffness term ``K`` in the eigenbasis of ``A``.

    ``relative_bound`` is ``||K diag(mu)^{-1/2}||_2``, the truncated proxy for
    the norm of ``K`` from the energy space into ``H``.
    """

    k: np.ndarray
    relative_bound: float

    @classmethod
    def from_matrix(cls, k, freqs: Frequencies) -> "StiffnessPerturbation":
        k = np.array(k, dtype=float)
        if k.shape != (freqs.n, freqs.n):
            raise ValueError(f"stiffness matrix has shape {k.shape}, expected {(freqs.n, freqs.n)}")
        bound = float(np.linalg.norm(k / freqs.sqrt_mu[None, :], 2))
        return cls(_frozen(k), bound)

    @property
    def n(self) -> int:
        return self.k.shape[0]


@dataclass(frozen=True)
class GeneratorMatrix:
    """First-order generator in energy coordinates together with its blocks.

    ``g`` is the perturbed generator, ``g0 = [[0, S], [-S, 0]]`` the
    skew-symmetric reference.  ``d`` / ``k`` keep the modal blocks so the
    resolvent can be formed from the N x N quadratic pencil.
    """

    g: np.ndarray
    g0: np.ndarray
    kind: str
    sqrt_mu: np.ndarray
    d: Optional[np.ndarray] = None
    k: Optional[np.ndarray] = None

    @property
    def n_modes(self) -> int:
        return self.sqrt_mu.size

    @property
    def mu(self) -> np.ndarray:
        return self.sqrt_mu ** 2

    def reference(self) -> "GeneratorMatrix":
        """The unperturbed generator as a generator of its own."""
        return GeneratorMatrix(self.g0, self.g0, DISSIPATIVE, self.sqrt_mu)

    def pencil(self, z: complex) -> np.ndarray:
        """``Q(z) = z^2 I + z D + diag(mu) + K``."""
        n = self.n_modes
        q = np.zeros((n, n), dtype=complex)
        if self.d is not None:
            q += z * self.d
        if self.k is not None:
            q += self.k
        q[np.diag_indices(n)] += z * z + self.mu
        return q

    @property
    def coupled(self) -> bool:
        """False when the pencil is diagonal for every shift."""
        mats = [m for m in (self.d, self.k) if m is not None]
        return any(np.count_nonzero(m - np.diag(np.diag(m))) for m in mats)


def assemble_generator(freqs: Frequencies,
                       damping: Optional[ModalDamping] = None,
                       stiffness: Optional[StiffnessPerturbation] = None) -> GeneratorMatrix:
    """Build ``G`` with ``z' = G z``.

    Dissipative: ``[[0, S], [-S, -D]]``.  Stiffness-perturbed:
    ``[[0, S], [-S - K S^{-1}, 0]]``.  Passing neither gives the undamped
    system (``G = G0``).

    Raises
    ------
    ValueError
        On dimension mismatch, when both perturbations are given, or when
        ``diag(mu) + K`` is not positive definite.
    """
    if damping is not None and stiffness is not None:
        raise ValueError("give either damping or stiffness, not both")
    n = freqs.n
    s = freqs.sqrt_mu
    g0 = np.zeros((2 * n, 2 * n))
    g0[:n, n:] = np.diag(s)
    g0[n:, :n] = -np.diag(s)
    g = g0.copy()
    if stiffness is not None:
        if stiffness.n != n:
            raise ValueError(f"stiffness has {stiffness.n} modes, frequencies have {n}")
        k = stiffness.k
        lowest = np.linalg.eigvalsh(np.diag(freqs.mu) + 0.5 * (k + k.T))[0]
        if lowest <= 0:
            raise ValueError(f"A + K is not positive (smallest eigenvalue {lowest:.6g})")
        g[n:, :n] -= k / s[None, :]
        out = GeneratorMatrix(_frozen(g), _frozen(g0), STIFFNESS, freqs.sqrt_mu, k=stiffness.k)
        return out
    d = None
    if damping is not None:
        if damping.n != n:
            raise ValueError(f"damping has {damping.n} modes, frequencies have {n}")
        d = damping.d
        g[n:, n:] = -d
    return GeneratorMatrix(_frozen(g), _frozen(g0), DISSIPATIVE, freqs.sqrt_mu, d=d)


@dataclass(frozen=True)
class EnergyState:
    """State vector ``z = (A^{1/2} x, v)`` in energy coordinates."""

    z: np.ndarray

    @classmethod
    def from_modal(cls, freqs: Frequencies, x, v) -> "EnergyState":
        x = np.asarray(x)
        v = np.asarray(v)
        return cls(np.concatenate([freqs.sqrt_mu * x, v]))

    def to_modal(self, freqs: Frequencies):
        n = freqs.n
        return self.z[:n] / freqs.sqrt_mu, self.z[n:]

    @property
    def energy(self) -> float:
        return energy(self)


def energy(state) -> float:
    """Half the squared energy norm; accepts an ``EnergyState`` or a vector."""
    z = state.z if isinstance(state, EnergyState) else np.asarray(state)
    return 0.5 * float(np.vdot(z, z).real)


def undamped_eigenpairs(freqs: Frequencies):
    """Eigenpairs of ``G0`` as ``(eigenvalues, vectors)``.

    Column ``k-1`` holds ``V_{+k} = (e_k, i e_k)/sqrt(2)`` with eigenvalue
    ``+i sqrt(mu_k)``, column ``N+k-1`` holds ``V_{-k}`` with ``-i sqrt(mu_k)``.
    The columns form an orthonormal basis.
    """
    n = freqs.n
    eye = np.eye(n)
    vecs = np.vstack([np.hstack([eye, eye]), np.hstack([1j * eye, -1j * eye])]) / np.sqrt(2)
    lams = np.concatenate([1j * freqs.sqrt_mu, -1j * freqs.sqrt_mu])
    return lams, vecs


def undamped_mode(freqs: Frequencies, index: int):
    """``(eigenvalue, vector)`` of ``G0`` for a signed mode index (±1..±N)."""
    if index == 0 or abs(index) > freqs.n:
        raise IndexError(f"mode index {index} outside ±1..±{freqs.n}")
    n = freqs.n
    k = abs(index) - 1
    sign = 1 if index > 0 else -1
    z = np.zeros(2 * n, dtype=complex)
    z[k] = 1 / np.sqrt(2)
    z[n + k] = sign * 1j / np.sqrt(2)
    return sign * 1j * freqs.sqrt_mu[k], z


@dataclass(frozen=True)
class System:
    """Frequencies plus at most one perturbation; the unit every analysis runs on."""

    freqs: Frequencies
    damping: Optional[ModalDamping] = None
    stiffness: Optional[StiffnessPerturbation] = None

    @property
    def generator(self) -> GeneratorMatrix:
        return assemble_generator(self.freqs, self.damping, self.stiffness)

    @property
    def kind(self) -> str:
        return STIFFNESS if self.stiffness is not None else DISSIPATIVE

    @property
    def perturbation_norm(self) -> float:
        """``||B*||^2`` or ``||K S^{-1}||``: the operator norm of the perturbation."""
        if self.stiffness is not None:
            return self.stiffness.relative_bound
        return 0.0 if self.damping is None else self.damping.bstar_norm_sq

    @property
    def beta(self) -> float:
        return 0.0 if self.damping is None else self.damping.beta
