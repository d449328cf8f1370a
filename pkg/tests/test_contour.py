import numpy as np
import pytest

from conftest import PI4, eigs, pipeline, system
from specdecay import contour as cnt
from specdecay.families import hinged_beam
from specdecay.gaps import ContourRect, build_contours, gaps, midpoints
from specdecay.modal import System, undamped_mode


def gamma(freqs, n, nodes=32):
    a = midpoints(freqs)
    half = 0.5 * (freqs.sqrt_mu[n] - freqs.sqrt_mu[n - 1])
    return ContourRect(n, -half, half, a[n - 1], a[n], "gamma", nodes)


def test_resolvent_on_eigenvector():
    freqs = hinged_beam(8)
    gen0 = System(freqs).generator
    mu1 = freqs.sqrt_mu[0]
    _, v1 = undamped_mode(freqs, 1)
    lam = 2j * mu1
    w = cnt.resolvent_apply(gen0, lam, v1)
    np.testing.assert_allclose(w, v1 / (lam - 1j * mu1), atol=1e-14)


def test_resolvent_matches_dense_inverse():
    gen = system("indicator", 16).generator
    rhs = np.random.default_rng(0).standard_normal(32)
    lam = 3.0 + 17j
    np.testing.assert_allclose(cnt.resolvent_apply(gen, lam, rhs), cnt.resolvent_matrix(gen, lam) @ rhs,
                               rtol=1e-12, atol=1e-14)


def test_resolvent_singular_shift():
    freqs = hinged_beam(8)
    gen0 = System(freqs).generator
    with pytest.raises(cnt.SingularShiftError, match="collides"):
        cnt.resolvent_apply(gen0, 1j * freqs.sqrt_mu[0], np.ones(16))


def test_resolvent_warns_near_eigenvalue():
    freqs = hinged_beam(8)
    gen0 = System(freqs).generator
    lams = np.concatenate([1j * freqs.sqrt_mu, -1j * freqs.sqrt_mu])
    with pytest.warns(RuntimeWarning):
        try:
            cnt.resolvent_apply(gen0, 1j * freqs.sqrt_mu[0] + 1e-12, np.ones(16), lams)
        except (cnt.SingularShiftError, ArithmeticError):
            pass


def test_reference_projector_gamma2():
    freqs = hinged_beam(16)
    gen0 = System(freqs).generator
    res = cnt.projector(gen0, gamma(freqs, 2))
    _, v2 = undamped_mode(freqs, 2)
    assert res.rank == 1
    np.testing.assert_allclose(res.p, np.outer(v2, v2.conj()), atol=1e-9)
    np.testing.assert_allclose(res.p, res.p.conj().T, atol=1e-9)


def test_reference_box_rank():
    freqs = hinged_beam(16)
    box, _ = build_contours(freqs, 2)
    assert cnt.projector(System(freqs).generator, box).rank == 4


def test_structured_projector_matches_dense_quadrature():
    s = system("indicator", 16)
    gen = s.generator
    rect = gamma(s.freqs, 3)
    dense = sum(w / (2j * np.pi) * cnt.resolvent_matrix(gen, z) for z, w in zip(rect.nodes, rect.weights))
    np.testing.assert_allclose(cnt.projector(gen, rect).p, dense, atol=1e-9)


def test_damped_gamma3_rank_one_and_holds_eigenvalue():
    gen = system("a0=1", 64).generator
    res = cnt.projector(gen, gamma(system("a0=1", 64).freqs, 3))
    assert res.rank == 1
    lam3 = -1 + 1j * np.sqrt(81 * PI4 - 1)
    assert res.contour.contains(lam3)


def test_mirror_contour_agrees_with_direct_computation():
    gen = system("indicator", 16).generator
    _, gammas = build_contours(system("indicator", 16).freqs, 2)
    sym = cnt.analyze_contours(gen, None, gammas[:2], use_symmetry=True)
    direct = cnt.analyze_contours(gen, None, gammas[:2], use_symmetry=False)
    np.testing.assert_allclose(sym[1].pb.p, direct[1].pb.p, atol=1e-10)


def test_dilation_when_eigenvalue_on_edge():
    gen = system("a0=1", 16).generator
    lam = -1 + 1j * np.sqrt(PI4 - 1)
    rect = ContourRect(1, -1.0, 3.0, 1.0, lam.imag + 5, nodes_per_side=32)
    res = cnt.projector(gen, rect, eigs("a0=1", 16).eigenvalues)
    assert res.contour.re_min < -1.0
    assert res.rank == 1


def test_quadrature_failure_is_reported():
    gen = system("a0=1", 16).generator
    rect = ContourRect(1, -50.0, 50.0, 1.0, 3000.0, nodes_per_side=4)
    with pytest.raises(cnt.QuadratureError, match="increase nodes_per_side"):
        cnt.projector(gen, rect, max_doublings=0)


@pytest.mark.parametrize("cfg", ["a0=1", "undamped", "indicator"])
def test_counts_agree_with_direct_counting(cfg):
    s = system(cfg, 64)
    N0, box, gammas, entries = pipeline(cfg, 64)
    assert N0 == 2
    rep = cnt.count_all(s.generator, box, gammas, eigs(cfg, 64), entries, strict=True)
    assert rep.consistent and rep.box_rank == 4
    assert all(r.rank == 1 for r in rep.rows if r.kind == "gamma")
    assert rep.rank_equality_holds()


def test_count_mismatch_detected():
    s = system("a0=1", 32)
    N0, box, gammas, entries = pipeline("a0=1", 32)
    fake = eigs("a0=1", 32)
    shifted = type(fake)(fake.eigenvalues + 1e6, fake.eigenvectors, fake.residuals, fake.cond_estimate,
                         fake.trusted, fake.trust_limit, fake.sqrt_mu)
    with pytest.raises(cnt.CountMismatchError):
        cnt.count_all(s.generator, box, gammas, shifted, entries, strict=True)


def test_projectors_on_distinct_contours_annihilate():
    _, _, _, entries = pipeline("indicator", 64)
    ps = [e.pb.p for e in entries[:9]]
    for i in range(len(ps)):
        for j in range(len(ps)):
            if i != j:
                assert np.linalg.norm(ps[i] @ ps[j], 2) < 1e-5


def test_undamped_differences_vanish():
    s = system("undamped", 64)
    _, _, gammas, entries = pipeline("undamped", 64)
    rep = cnt.projector_diff_norms(s.generator, gammas, gaps(s.freqs), entries)
    assert rep.norms.max() < 1e-8
    ex = cnt.extract_all(s.generator, entries)
    assert max(x.closeness for x in ex) < 1e-8


def test_diff_norms_decay_and_square_summable():
    s = system("a0=1", 64)
    _, _, gammas, entries = pipeline("a0=1", 64)
    rep = cnt.projector_diff_norms(s.generator, gammas, gaps(s.freqs), entries)
    pos = rep.norms[rep.indices > 0]
    assert np.all(np.diff(pos) < 0)
    assert np.all(rep.norms <= rep.constant * rep.bounds * (1 + 1e-12))
    assert rep.tail_sum < 1e-3
    assert np.all(rep.norms < 1)


def test_extraction_a0_1():
    s = system("a0=1", 64)
    _, _, gammas, entries = pipeline("a0=1", 64)
    prof = gaps(s.freqs)
    ex = {x.index: x for x in cnt.extract_all(s.generator, entries, eigs("a0=1", 64))}
    idx = sorted(ex)
    close = cnt.square_sum_report(idx, [ex[n].closeness for n in idx], [cnt.gap_bound(prof, n) for n in idx])
    assert ex[5].closeness <= close.constant * cnt.gap_bound(prof, 5)
    assert close.tail_sum < 1e-3
    assert all(abs(ex[n].phi_norm - 1) < 0.2 for n in idx)
    assert abs(ex[idx[-1]].phi_norm - 1) < abs(ex[3].phi_norm - 1)
    assert max(x.rayleigh_error for x in ex.values()) < 1e-8


def test_extraction_requires_rank_one():
    s = system("a0=1", 32)
    _, box, _, entries = pipeline("a0=1", 32)
    with pytest.raises(ValueError):
        cnt.extract_eigvec(s.generator, box, pb=entries[0].pb)


def test_resolvent_gap_constant_stable():
    consts = []
    for n in (32, 64):
        s = system("indicator", n)
        _, _, gammas, _ = pipeline("indicator", n)
        consts.append(cnt.resolvent_gap_constant(s.generator, gammas, gaps(s.freqs)))
    assert abs(consts[1] / consts[0] - 1) < 0.2
