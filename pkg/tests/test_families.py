import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from specdecay.families import (DampingSpec, axial_force_stiffness, clamped_free_beam, clamped_free_roots,
                                constant_damping, hinged_beam, indicator_damping, wave_string)
from specdecay.spectrum import full_spectrum
from specdecay.modal import System

PI2 = np.pi ** 2


def test_hinged_beam_frequencies():
    f = hinged_beam(3)
    np.testing.assert_allclose(f.sqrt_mu, [PI2, 4 * PI2, 9 * PI2], rtol=1e-15)
    assert f.mu[0] == pytest.approx(97.40909103400242, rel=1e-14)
    assert f.family_tag == "hinged-beam"


def test_wave_gaps_constant():
    np.testing.assert_allclose(np.diff(wave_string(4).sqrt_mu), [np.pi] * 3, rtol=1e-14)


def test_clamped_free_first_roots():
    b = clamped_free_roots(6)
    # independent oracle: brentq on the unscaled equation (fine for small beta)
    f = lambda x: np.cos(x) * np.cosh(x) + 1
    for k in range(1, 5):
        ref = optimize.brentq(f, (k - 1) * np.pi + 1e-9, k * np.pi, xtol=1e-15)
        assert b[k - 1] == pytest.approx(ref, abs=1e-11)
    assert b[0] == pytest.approx(1.8751040687, abs=1e-9)
    assert b[1] == pytest.approx(4.6940911330, abs=1e-9)
    np.testing.assert_allclose(clamped_free_beam(6).mu, b ** 4, rtol=1e-14)


def test_clamped_free_asymptotics():
    b = clamped_free_roots(40)
    k = np.arange(1, 41)
    dev = np.abs(b - (k - 0.5) * np.pi)[2:]
    assert np.all(np.diff(dev) <= 1e-12)
    assert dev[-1] < 1e-12


def test_indicator_full_interval_is_constant():
    d = indicator_damping(hinged_beam(8), 1.0, 0.0, 1.0)
    np.testing.assert_allclose(d.d, 2 * np.eye(8), atol=1e-14)


def test_indicator_half_interval_entries():
    d = indicator_damping(hinged_beam(8), 1.0, 0.0, 0.5).d
    assert d[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert d[0, 1] == pytest.approx(8 / (3 * np.pi), abs=1e-14)
    assert d[0, 1] == pytest.approx(0.84883, abs=1e-5)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.1, 5), ab=st.tuples(st.floats(0, 1), st.floats(0, 1)).filter(lambda t: abs(t[0] - t[1]) > 1e-3),
       j=st.integers(1, 6), k=st.integers(1, 6))
def test_indicator_matches_quadrature(c, ab, j, k):
    alpha, beta = sorted(ab)
    d = indicator_damping(hinged_beam(6), c, alpha, beta).d
    ref, _ = integrate.quad(lambda x: 4 * c * np.sin(j * np.pi * x) * np.sin(k * np.pi * x), alpha, beta,
                            epsabs=1e-13, epsrel=1e-13)
    assert d[j - 1, k - 1] == pytest.approx(ref, abs=1e-11)


def test_indicator_requires_hinged_modes():
    with pytest.raises(ValueError):
        indicator_damping(wave_string(5), 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        indicator_damping(hinged_beam(5), 1.0, 0.6, 0.5)


def test_constant_damping():
    d = constant_damping(5, 1.0)
    assert d.beta == 1.0
    np.testing.assert_array_equal(constant_damping(5, 0.0).d, 0)
    with pytest.raises(ValueError):
        constant_damping(5, -1.0)


def test_damping_spec_builds():
    f = hinged_beam(5)
    np.testing.assert_array_equal(DampingSpec("constant", a0=2.0).build(f).d, 4 * np.eye(5))
    with pytest.raises(ValueError):
        DampingSpec("constant", a0=-1.0)
    with pytest.raises(ValueError):
        DampingSpec("viscous")


def test_axial_force():
    f = hinged_beam(6)
    k = axial_force_stiffness(f, 1.0)
    assert k.k[0, 0] == pytest.approx(-PI2, rel=1e-15)
    assert k.relative_bound == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        axial_force_stiffness(f, PI2)
    with pytest.raises(ValueError):
        axial_force_stiffness(wave_string(6), 1.0)


def test_axial_force_vanishes_continuously():
    f = hinged_beam(6)
    small = full_spectrum(System(f, stiffness=axial_force_stiffness(f, 1e-9)).generator).eigenvalues
    ref = full_spectrum(System(f).generator).eigenvalues
    np.testing.assert_allclose(small, ref, atol=1e-8)
    np.testing.assert_array_equal(axial_force_stiffness(f, 0.0).k, 0)
