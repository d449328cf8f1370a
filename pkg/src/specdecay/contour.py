"""Riesz projections by contour quadrature of the resolvent.

The resolvent of ``G = [[0, S], [-L, -D]]`` (``L = S + K S^{-1}``) is formed
from the N x N pencil ``Q(z) = z^2 + z D + diag(mu) + K``::

    (z - G)^{-1} = [[(I - S R L)/z,  S R],
                    [-R L,           z R]],      R = Q(z)^{-1}

so a projector costs one N x N inverse per quadrature node instead of a
2N x 2N one.  :func:`resolvent_apply` keeps the plain dense LU route.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg as la

from .gaps import ContourRect, GapProfile
from .modal import GeneratorMatrix, undamped_mode, Frequencies
from .spectrum import EigenSet

log = logging.getLogger(__name__)

IDEMPOTENCY_TOL = 1e-6
IDEMPOTENCY_FAIL = 1e-4
NEAR_EDGE, DILATION = 1e-2, 5e-2
_CHUNK_ELEMENTS = 4_000_000


class SingularShiftError(ArithmeticError):
    pass


class QuadratureError(RuntimeError):
    pass


class CountMismatchError(RuntimeError):
    pass


def resolvent_apply(gen: GeneratorMatrix, lam: complex, rhs, eigenvalues=None) -> np.ndarray:
    """Solve ``(lam I - G) w = rhs`` by dense LU with partial pivoting."""
    g = gen.g
    m = g.shape[0]
    if eigenvalues is not None:
        eigenvalues = np.asarray(eigenvalues)
        near = np.abs(eigenvalues - lam) <= 1e-9 * (1 + abs(lam))
        if near.any():
            warnings.warn(f"shift {lam} lies within 1e-9 of eigenvalue {eigenvalues[near][0]}",
                          RuntimeWarning, stacklevel=2)
    a = lam * np.eye(m) - g
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= m * np.finfo(float).eps * np.abs(a).max():
        lams = np.linalg.eigvals(g)
        hit = lams[np.argmin(np.abs(lams - lam))]
        raise SingularShiftError(f"shift {lam} is an eigenvalue of G (collides with {hit})")
    rhs = np.asarray(rhs, dtype=complex)
    w = la.lu_solve((lu, piv), rhs, check_finite=False)
    res = np.linalg.norm(a @ w - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if res > 1e-10:
        raise ArithmeticError(f"resolvent solve residual {res:.3e} exceeds 1e-10")
    return w


def resolvent_matrix(gen: GeneratorMatrix, lam: complex) -> np.ndarray:
    """Dense ``(lam - G)^{-1}``."""
    return np.linalg.inv(lam * np.eye(gen.g.shape[0]) - gen.g)


def _pencil_inverses(gen: GeneratorMatrix, z: np.ndarray) -> np.ndarray:
    """``Q(z_j)^{-1}`` for every node; returns diagonals only for uncoupled pencils."""
    n = gen.n_modes
    if not gen.coupled:
        diag = z[:, None] ** 2 + gen.mu[None, :]
        if gen.d is not None:
            diag = diag + z[:, None] * np.diag(gen.d)[None, :]
        if gen.k is not None:
            diag = diag + np.diag(gen.k)[None, :]
        return 1.0 / diag
    q = z[:, None, None] * (gen.d if gen.d is not None else 0.0) + (gen.k if gen.k is not None else 0.0)
    q = np.broadcast_to(q, (z.size, n, n)).astype(complex)
    idx = np.arange(n)
    q[:, idx, idx] += z[:, None] ** 2 + gen.mu[None, :]
    return np.linalg.inv(q)


def _quadrature_projector(gen: GeneratorMatrix, contour: ContourRect) -> np.ndarray:
    n = gen.n_modes
    s = gen.sqrt_mu
    z = contour.nodes
    c = contour.weights / (2j * np.pi)
    diagonal = not gen.coupled
    a1 = np.sum(c / z)
    shape = (n,) if diagonal else (n, n)
    a2 = np.zeros(shape, dtype=complex)
    a3 = np.zeros(shape, dtype=complex)
    a4 = np.zeros(shape, dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // (n if diagonal else n * n))
    for lo in range(0, z.size, chunk):
        zz, cc = z[lo:lo + chunk], c[lo:lo + chunk]
        r = _pencil_inverses(gen, zz)
        ax = (slice(None),) + (None,) * (r.ndim - 1)
        a2 += np.sum((cc / zz)[ax] * r, axis=0)
        a3 += np.sum(cc[ax] * r, axis=0)
        a4 += np.sum((cc * zz)[ax] * r, axis=0)
    if diagonal:
        a2, a3, a4 = np.diag(a2), np.diag(a3), np.diag(a4)
    # L = S + K S^{-1}
    lmat = np.diag(s) if gen.k is None else np.diag(s) + gen.k / s[None, :]
    p = np.empty((2 * n, 2 * n), dtype=complex)
    p[:n, :n] = a1 * np.eye(n) - s[:, None] * (a2 @ lmat)
    p[:n, n:] = s[:, None] * a3
    p[n:, :n] = -(a3 @ lmat)
    p[n:, n:] = a4
    return p


@dataclass
class ProjectorResult:
    p: np.ndarray
    idempotency_residual: float
    rank: int
    trace_raw: complex
    contour_index: int
    nodes_per_side: int = 0
    contour: Optional[ContourRect] = field(default=None, repr=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.p, 2))


def _finish(p, contour, nodes_per_side):
    tr = complex(np.trace(p))
    rank = int(round(tr.real))
    resid = float(np.linalg.norm(p @ p - p, 2))
    return ProjectorResult(p, resid, rank, tr, contour.index, nodes_per_side, contour)


def _clear_of_spectrum(contour: ContourRect, eigenvalues) -> ContourRect:
    # a pole closer than ~1% of the side length stalls Gauss-Legendre convergence
    if eigenvalues is None:
        return contour
    for _ in range(5):
        gap = contour.boundary_distance(eigenvalues).min()
        if gap > NEAR_EDGE * contour.width:
            return contour
        log.info("eigenvalue within %.2e of contour %d; dilating", gap, contour.index)
        contour = contour.dilated(DILATION * contour.width)
    return contour


def projector(gen: GeneratorMatrix, contour: ContourRect, eigenvalues=None,
              max_doublings: int = 3) -> ProjectorResult:
    """Riesz projection ``(1/2 pi i) \\oint (z - G)^{-1} dz`` over ``contour``.

    Nodes per side are doubled until ``||P^2 - P|| < 1e-6 (1 + ||P||)``.

    Raises
    ------
    QuadratureError
        If the idempotency residual still exceeds 1e-4 after the doublings.
    """
    contour = _clear_of_spectrum(contour, eigenvalues)
    nps = contour.nodes_per_side
    for attempt in range(max_doublings + 1):
        rect = contour if attempt == 0 else contour.with_nodes(nps)
        res = _finish(_quadrature_projector(gen, rect), rect, nps)
        if res.idempotency_residual < IDEMPOTENCY_TOL * (1 + res.norm):
            break
        nps *= 2
    if res.idempotency_residual > IDEMPOTENCY_FAIL:
        raise QuadratureError(
            f"contour {contour.index}: idempotency residual {res.idempotency_residual:.2e}; "
            "quadrature insufficient, increase nodes_per_side")
    if abs(res.trace_raw - res.rank) >= 0.1 or abs(res.trace_raw.imag) >= 0.05:
        raise QuadratureError(f"contour {contour.index}: trace {res.trace_raw} is not near an integer")
    return res


def _mirror(res: ProjectorResult, contour: ContourRect) -> ProjectorResult:
    # G is real: the mirrored contour carries the conjugate projector
    return ProjectorResult(res.p.conj(), res.idempotency_residual, res.rank, res.trace_raw.conjugate(),
                           contour.index, res.nodes_per_side, contour)


def _is_mirror(a: ContourRect, b: ContourRect) -> bool:
    return (a.index == -b.index and a.re_min == b.re_min and a.re_max == b.re_max
            and a.im_min == -b.im_max and a.im_max == -b.im_min)


@dataclass
class ContourEntry:
    contour: ContourRect
    pb: ProjectorResult
    p0: ProjectorResult

    @property
    def diff_norm(self) -> float:
        return float(np.linalg.norm(self.pb.p - self.p0.p, 2))


def analyze_contours(gen: GeneratorMatrix, box: Optional[ContourRect], gammas: Sequence[ContourRect],
                     eigs: Optional[EigenSet] = None, use_symmetry: bool = True) -> List[ContourEntry]:
    """Perturbed and reference projectors for the box (first, if given) and each rectangle."""
    ref = gen.reference()
    lams = None if eigs is None else eigs.eigenvalues
    done: Dict[int, ContourEntry] = {}
    out = []
    for rect in ([box] if box is not None else []) + list(gammas):
        twin = done.get(-rect.index)
        if use_symmetry and rect.kind == "gamma" and twin is not None and _is_mirror(rect, twin.contour):
            entry = ContourEntry(rect, _mirror(twin.pb, rect), _mirror(twin.p0, rect))
        else:
            pb = projector(gen, rect, lams)
            p0 = projector(ref, pb.contour, np.concatenate([1j * gen.sqrt_mu, -1j * gen.sqrt_mu]))
            entry = ContourEntry(rect, pb, p0)
        if rect.kind == "gamma":
            done[rect.index] = entry
        out.append(entry)
    return out


@dataclass
class CountRow:
    index: int
    kind: str
    rank: int
    rank_reference: int
    direct_count: int
    diff_norm: float

    @property
    def agrees(self) -> bool:
        return self.rank == self.direct_count


@dataclass
class CountReport:
    rows: List[CountRow]
    N0: int

    @property
    def consistent(self) -> bool:
        return all(r.agrees for r in self.rows)

    @property
    def box_rank(self) -> int:
        return next(r.rank for r in self.rows if r.kind == "box")

    def rank_equality_holds(self) -> bool:
        """Wherever ``||P^B - P^0|| < 1`` the two ranks coincide."""
        return all(r.rank == r.rank_reference for r in self.rows if r.diff_norm < 1)


def count_all(gen: GeneratorMatrix, box: ContourRect, gammas: Sequence[ContourRect], eigs: EigenSet,
              entries: Optional[List[ContourEntry]] = None, strict: bool = False) -> CountReport:
    """Projector ranks next to direct counts of dense eigenvalues inside each contour."""
    if entries is None:
        entries = analyze_contours(gen, box, gammas, eigs)
    rows = []
    for e in entries:
        rect = e.pb.contour if e.pb.contour is not None else e.contour
        direct = int(np.count_nonzero(rect.contains(eigs.eigenvalues)))
        rows.append(CountRow(e.contour.index, e.contour.kind, e.pb.rank, e.p0.rank, direct, e.diff_norm))
    report = CountReport(rows, box.index)
    if strict and not report.consistent:
        bad = [(r.index, r.rank, r.direct_count) for r in rows if not r.agrees]
        raise CountMismatchError(f"projector rank disagrees with direct count at {bad}")
    return report


def gap_bound(profile: GapProfile, n: int) -> float:
    """``delta_n / delta_{n-1}^2`` for rectangle ``±n``."""
    n = abs(n)
    return profile.gap(n) / profile.gap(n - 1) ** 2


@dataclass
class DiffNormReport:
    indices: np.ndarray
    norms: np.ndarray
    bounds: np.ndarray
    constant: float
    partial_sums: np.ndarray
    tail_sum: float


def square_sum_report(indices, values, bounds) -> DiffNormReport:
    indices = np.asarray(indices)
    values = np.asarray(values, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    constant = float(np.max(values / bounds)) if values.size else 0.0
    partial = np.cumsum(values ** 2)
    mags = np.abs(indices)
    cut = np.quantile(mags, 0.75) if mags.size else 0
    tail = float(np.sum(values[mags > cut] ** 2))
    return DiffNormReport(indices, values, bounds, constant, partial, tail)


def projector_diff_norms(gen: GeneratorMatrix, gammas: Sequence[ContourRect], profile: GapProfile,
                         entries: Optional[List[ContourEntry]] = None) -> DiffNormReport:
    """``||P^B_n - P^0_n||_2`` per rectangle, the smallest ``C`` with norm ``<= C delta_n/delta_{n-1}^2``,
    and partial sums of squares."""
    if entries is None:
        entries = analyze_contours(gen, None, gammas)
    entries = [e for e in entries if e.contour.kind == "gamma"]
    idx = [e.contour.index for e in entries]
    return square_sum_report(idx, [e.diff_norm for e in entries], [gap_bound(profile, n) for n in idx])


@dataclass
class Extraction:
    index: int
    phi: np.ndarray
    closeness: float
    phi_norm: float
    rayleigh: complex
    eigenvalue: Optional[complex] = None

    @property
    def rayleigh_error(self) -> float:
        if self.eigenvalue is None:
            return float("nan")
        return abs(self.rayleigh - self.eigenvalue)


def extract_eigvec(gen: GeneratorMatrix, gamma: ContourRect, v_n=None,
                   pb: Optional[ProjectorResult] = None, eigs: Optional[EigenSet] = None) -> Extraction:
    """``phi_n = P^B_n V_n`` (not renormalised) and its distance to ``V_n``."""
    if pb is None:
        pb = projector(gen, gamma, None if eigs is None else eigs.eigenvalues)
    if pb.rank != 1:
        raise ValueError(f"contour {gamma.index} has projector rank {pb.rank}, expected 1")
    if v_n is None:
        freqs = Frequencies(gen.mu, "custom")
        _, v_n = undamped_mode(freqs, gamma.index)
    v = v_n.z if hasattr(v_n, "z") else np.asarray(v_n)
    phi = pb.p @ v
    rq = complex(np.vdot(phi, gen.g @ phi) / np.vdot(phi, phi))
    lam = None
    if eigs is not None:
        inside = eigs.eigenvalues[gamma.contains(eigs.eigenvalues)]
        if inside.size == 1:
            lam = complex(inside[0])
    return Extraction(gamma.index, phi, float(np.linalg.norm(phi - v)), float(np.linalg.norm(phi)), rq, lam)


def extract_all(gen: GeneratorMatrix, entries: List[ContourEntry], eigs: Optional[EigenSet] = None):
    return [extract_eigvec(gen, e.contour, pb=e.pb, eigs=eigs) for e in entries if e.contour.kind == "gamma"]


def resolvent_gap(gen: GeneratorMatrix, contour: ContourRect, samples: int = 8) -> float:
    """Max over sampled nodes of ``||(z - G)^{-1} - (z - G0)^{-1}||_2``."""
    z = contour.nodes
    pick = z[np.linspace(0, z.size - 1, samples).round().astype(int)]
    eye = np.eye(gen.g.shape[0])
    worst = 0.0
    for lam in pick:
        diff = np.linalg.inv(lam * eye - gen.g) - np.linalg.inv(lam * eye - gen.g0)
        worst = max(worst, float(np.linalg.norm(diff, 2)))
    return worst


def resolvent_gap_constant(gen: GeneratorMatrix, gammas: Sequence[ContourRect], profile: GapProfile,
                           samples: int = 8) -> float:
    """Smallest ``C'`` with resolvent gap ``<= C' / delta_{n-1}^2`` over the given rectangles."""
    return max(resolvent_gap(gen, gm, samples) * profile.gap(abs(gm.index) - 1) ** 2 for gm in gammas)
