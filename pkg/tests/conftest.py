"""Shared, cached systems and pipeline stages (contour analyses are the slow part)."""
from functools import lru_cache

import numpy as np
import pytest

from specdecay import contour as cnt
from specdecay.families import axial_force_stiffness, constant_damping, hinged_beam, indicator_damping
from specdecay.gaps import build_contours, compute_N0, gaps
from specdecay.modal import System
from specdecay.spectrum import full_spectrum

PI2 = np.pi ** 2
PI4 = np.pi ** 4


@lru_cache(maxsize=None)
def system(config: str, n: int) -> System:
    freqs = hinged_beam(n)
    if config.startswith("a0="):
        return System(freqs, constant_damping(n, float(config[3:])))
    if config == "indicator":
        return System(freqs, indicator_damping(freqs, 1.0, 0.0, 0.5))
    if config == "undamped":
        return System(freqs)
    if config.startswith("p="):
        return System(freqs, stiffness=axial_force_stiffness(freqs, float(config[2:])))
    raise KeyError(config)


@lru_cache(maxsize=None)
def eigs(config: str, n: int):
    return full_spectrum(system(config, n).generator)


@lru_cache(maxsize=None)
def pipeline(config: str, n: int, kappa: float = 0.5):
    """(N0, box, gammas, entries) for a hinged-beam config."""
    s = system(config, n)
    N0 = compute_N0(gaps(s.freqs), s.perturbation_norm, kappa)
    box, gammas = build_contours(s.freqs, N0)
    entries = cnt.analyze_contours(s.generator, box, gammas, eigs(config, n))
    return N0, box, gammas, entries


@lru_cache(maxsize=None)
def modal_roots(a0: float, n: int) -> np.ndarray:
    """Roots of lambda^2 + 2 a0 lambda + k^4 pi^4 = 0, k = 1..n, computed pairwise."""
    out = []
    for k in range(1, n + 1):
        out.extend(np.roots([1.0, 2 * a0, (k * k * PI2) ** 2]))
    return np.array(out, dtype=complex)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{key:2d}] {line}")
