"""Frequency gaps, the growing-gap assumptions, and the contour geometry.

Indexing follows the modes: ``delta[k-1] = sqrt(mu_{k+1}) - sqrt(mu_k)``.
Rectangle ``n`` surrounds ``+i sqrt(mu_n)``; its horizontal sides sit at the
midpoints ``a_n = (sqrt(mu_{n-1}) + sqrt(mu_n)) / 2`` (with ``mu_0 = 0``), its
vertical sides at ``Re = ±delta_n / 2``.  Rectangle ``-n`` is its mirror image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .modal import Frequencies

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"

_EXACT_A1 = {
    "hinged-beam": (HOLDS, "exact: delta_k = (2k+1) pi^2 grows without bound"),
    "clamped-free-beam": (HOLDS, "exact: roots ~ (k - 1/2) pi so delta_k ~ 2k pi^2"),
    "wave": (FAILS, "exact: delta_k = pi for every k"),
}
_EXACT_A2 = {
    "hinged-beam": (HOLDS, "exact: (delta_{k+1}/delta_k^2)^2 ~ 1/(4 pi^4 k^2) is summable"),
    "clamped-free-beam": (HOLDS, "exact: (delta_{k+1}/delta_k^2)^2 ~ 1/(4 pi^4 k^2) is summable"),
    "wave": (FAILS, "exact: terms equal 1/pi^2, not summable"),
}


@dataclass(frozen=True)
class Verdict:
    status: str
    evidence: str

    def __bool__(self):
        return self.status == HOLDS


@dataclass(frozen=True)
class GapProfile:
    delta: np.ndarray
    a2_terms: np.ndarray
    family_tag: str = "custom"
    a1: Verdict = field(default=None, compare=False)
    a2: Verdict = field(default=None, compare=False)

    def gap(self, k: int) -> float:
        """``delta_k`` for 1-based ``k``."""
        return float(self.delta[k - 1])


def gaps(freqs: Frequencies) -> GapProfile:
    s = freqs.sqrt_mu
    delta = np.diff(s)
    with np.errstate(divide="ignore"):
        a2 = (delta[1:] / delta[:-1] ** 2) ** 2
    profile = GapProfile(delta, a2, freqs.family_tag)
    object.__setattr__(profile, "a1", check_A1(profile))
    object.__setattr__(profile, "a2", check_A2(profile))
    return profile


def _tail(x):
    m = math.ceil(x.size / 3)
    return np.arange(x.size - m + 1, x.size + 1, dtype=float), x[-m:]


def _power_fit(k, y):
    """Least-squares ``log y = c + q log k``; returns ``(q, rms log residual)``."""
    if y.size < 3 or np.any(y <= 0):
        return float("nan"), float("inf")
    lk, ly = np.log(k), np.log(y)
    q, c = np.polyfit(lk, ly, 1)
    resid = ly - (c + q * lk)
    return float(q), float(np.sqrt(np.mean(resid ** 2)))


def _flat(y):
    mean = np.mean(y)
    return mean > 0 and (y.max() - y.min()) < 0.01 * mean


def check_A1(profile: GapProfile) -> Verdict:
    """Do the gaps grow without bound?  Heuristic on the tail, exact for built-ins."""
    if profile.family_tag in _EXACT_A1:
        return Verdict(*_EXACT_A1[profile.family_tag])
    k, tail = _tail(profile.delta)
    if tail.size >= 2 and _flat(tail):
        return Verdict(FAILS, f"tail gaps bounded: spread {np.ptp(tail):.3g} around mean {tail.mean():.3g}")
    head = profile.delta[:-tail.size]
    # growth must be visible: a strictly increasing tail that clears every earlier gap
    increasing = (tail.size >= 4 and np.all(np.diff(tail) > 0)
                  and (head.size == 0 or tail[0] > head.max()))
    q, res = _power_fit(k, tail)
    if increasing and q > 0 and res < 0.05:
        return Verdict(HOLDS, f"tail strictly increasing, delta_k ~ k^{q:.3f} (rms log residual {res:.3g})")
    return Verdict(INCONCLUSIVE, f"increasing={bool(increasing)}, exponent {q:.3g}, residual {res:.3g}")


def check_A2(profile: GapProfile) -> Verdict:
    """Is ``(delta_{k+1}/delta_k^2)`` square summable?  Integral comparison on the tail."""
    if profile.family_tag in _EXACT_A2:
        return Verdict(*_EXACT_A2[profile.family_tag])
    terms = profile.a2_terms
    if terms.size < 3 or not np.all(np.isfinite(terms)):
        return Verdict(INCONCLUSIVE, "too few finite terms")
    k, tail = _tail(terms)
    if _flat(tail):
        return Verdict(FAILS, f"terms bounded below by {tail.min():.3g} on the tail")
    q, res = _power_fit(k, tail)
    r = -q
    if res < 0.05 and r > 1:
        return Verdict(HOLDS, f"terms ~ k^-{r:.3f}, summable (rms log residual {res:.3g})")
    if res < 0.05 and r < 0.9:
        return Verdict(FAILS, f"terms ~ k^-{r:.3f}, not summable (rms log residual {res:.3g})")
    return Verdict(INCONCLUSIVE, f"decay exponent {r:.3g}, residual {res:.3g}")


def compute_N0(profile: GapProfile, perturbation_norm: float, kappa: float = 0.5) -> int:
    """Smallest ``N0 >= 2`` with ``2 * perturbation_norm / delta_{n-1} <= kappa`` for every ``n >= N0``.

    ``perturbation_norm`` is ``||B*||^2`` for damping (``||K S^{-1}||`` for a
    stiffness term).
    """
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    ok = 2.0 * perturbation_norm <= kappa * profile.delta
    if not ok[-1]:
        raise ValueError("no N0 within the truncation: truncation too small or damping too strong")
    bad = np.flatnonzero(~ok)
    first = bad[-1] + 2 if bad.size else 1  # 1-based gap index from which ok holds
    return max(2, first + 1)


@dataclass(frozen=True)
class ContourRect:
    """Positively oriented rectangle with composite Gauss-Legendre nodes.

    ``nodes`` are points on the boundary and ``weights`` the matching
    ``dz`` increments, so ``sum(weights * f(nodes))`` approximates the
    contour integral of ``f``.
    """

    index: int
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    kind: str = "gamma"
    nodes_per_side: int = 32
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("degenerate rectangle")
        x, w = np.polynomial.legendre.leggauss(self.nodes_per_side)
        corners = [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                   complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]
        nodes, weights = [], []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            half = 0.5 * (b - a)
            nodes.append(0.5 * (a + b) + half * x)
            weights.append(half * w)
        object.__setattr__(self, "nodes", np.concatenate(nodes))
        object.__setattr__(self, "weights", np.concatenate(weights))

    def with_nodes(self, nodes_per_side: int) -> "ContourRect":
        return ContourRect(self.index, self.re_min, self.re_max, self.im_min, self.im_max,
                           self.kind, nodes_per_side)

    def dilated(self, amount: float) -> "ContourRect":
        return ContourRect(self.index, self.re_min - amount, self.re_max + amount,
                           self.im_min - amount, self.im_max + amount, self.kind, self.nodes_per_side)

    def contains(self, z, closed: bool = False):
        """Strict interior test (closure with ``closed=True``); vectorised."""
        z = np.asarray(z)
        if closed:
            return ((z.real >= self.re_min) & (z.real <= self.re_max)
                    & (z.imag >= self.im_min) & (z.imag <= self.im_max))
        return ((z.real > self.re_min) & (z.real < self.re_max)
                & (z.imag > self.im_min) & (z.imag < self.im_max))

    def boundary_distance(self, z) -> np.ndarray:
        """Distance from each point to the rectangle boundary."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        dx = np.maximum(np.maximum(self.re_min - z.real, z.real - self.re_max), 0)
        dy = np.maximum(np.maximum(self.im_min - z.imag, z.imag - self.im_max), 0)
        outside = np.hypot(dx, dy)
        inside = np.minimum.reduce([z.real - self.re_min, self.re_max - z.real,
                                    z.imag - self.im_min, self.im_max - z.imag])
        return np.where(self.contains(z), inside, outside)

    @property
    def width(self) -> float:
        return self.re_max - self.re_min


def midpoints(freqs: Frequencies) -> np.ndarray:
    """``a_1..a_N`` with ``a_n = sqrt(mu_{n-1}) + delta_{n-1}/2`` and ``mu_0 = 0``."""
    s = np.concatenate([[0.0], freqs.sqrt_mu])
    return s[:-1] + 0.5 * np.diff(s)


def gamma_limit(n_modes: int, trust_fraction: float = 0.5) -> int:
    """Largest rectangle index whose top edge stays inside the trust region."""
    return int(math.floor(trust_fraction * n_modes)) - 1


def build_contours(freqs: Frequencies, N0: int, nodes_per_side: int = 32,
                   trust_fraction: float = 0.5) -> Tuple[ContourRect, List[ContourRect]]:
    """Box around the ``2*N0`` lowest frequencies and rectangles for ``N0 < |n| <= limit``.

    The box is ``|Im z| < a_{N0+1}``, ``|Re z| < delta_{N0}/2``; its lower
    neighbours ``±(N0+1)`` start exactly at its top edge, so box and
    rectangles tile the strip without gaps.  Rectangles are ordered
    ``+(N0+1), -(N0+1), +(N0+2), ...``.
    """
    if N0 < 2:
        raise ValueError("N0 must be >= 2")
    a = midpoints(freqs)
    s = freqs.sqrt_mu
    delta = np.diff(s)
    top = gamma_limit(freqs.n, trust_fraction)
    if N0 >= freqs.n:
        raise ValueError(f"N0 = {N0} exceeds the truncation ({freqs.n} modes)")
    height = a[N0] if N0 < freqs.n else s[-1]
    half = 0.5 * delta[N0 - 1]
    box = ContourRect(N0, -half, half, -height, height, "box", nodes_per_side)
    gammas = []
    for n in range(N0 + 1, top + 1):
        half = 0.5 * delta[n - 1]
        lo, hi = a[n - 1], a[n]
        gammas.append(ContourRect(n, -half, half, lo, hi, "gamma", nodes_per_side))
        gammas.append(ContourRect(-n, -half, half, -hi, -lo, "gamma", nodes_per_side))
    return box, gammas


def verify_region_cover(box: ContourRect, gammas: List[ContourRect], beta: float, mu1: float,
                        samples: int = 2000) -> bool:
    """Check that the spectral enclosure is covered by the box and rectangles.

    The enclosure is the strip ``-beta <= Re <= 0, |z| >= sqrt(mu1)`` (cut at
    the height of the highest rectangle) together with the real interval
    ``[-beta - r, r]``, ``r = sqrt(max(beta^2 - mu1, 0))``.  Points are tested
    against closed rectangles, since neighbouring rectangles share an edge.
    """
    r = math.sqrt(max(beta * beta - mu1, 0.0))
    half_box = box.re_max
    if not half_box > beta + r:
        return False
    if any(0.5 * gm.width < beta for gm in gammas):
        return False
    height = max([gm.im_max for gm in gammas], default=box.im_max)
    rects = [box] + list(gammas)

    def covered(pts):
        hit = np.zeros(pts.shape, dtype=bool)
        for rc in rects:
            hit |= rc.contains(pts, closed=True)
        return hit

    m = int(math.ceil(math.sqrt(samples)))
    xs = np.linspace(-beta, 0.0, max(m // 4, 2))
    ys = np.linspace(-height, height, 4 * m)
    strip = (xs[:, None] + 1j * ys[None, :]).ravel()
    strip = strip[np.abs(strip) >= math.sqrt(mu1)]
    interval = np.linspace(-beta - r, r, samples).astype(complex)
    return bool(covered(strip).all() and covered(interval).all())
