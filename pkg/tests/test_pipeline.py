"""Geometric normalization steps and the full convergent driver."""

import random

import pytest

from crnormal.scalars import QQ, ExactComplex
from crnormal.series import RealJet, HoloJet, jet_exp, jet_log, surface_weights, weights_nd
from crnormal.hypersurface import HypersurfaceJet, model_phi, push_forward_weighted
from crnormal.homological import formal_normalize, project_normal_space
from crnormal.maps import MapJet, signature_eps
from crnormal.pipeline import (convergent_normalize, gauge_parametrization,
                               normal_coordinates, normalize_segre_map,
                               orthonormal_frame_ode, solve_frame_ode,
                               straighten_locus_and_chain)

from conftest import (ONE, I, ec, family, perturb_model_2d, perturb_model_nd,
                      rand_ec)

W2 = surface_weights(1)


def model_2d(M=10, extra=()):
    phi = model_phi(1, 0, M)
    for k, v in extra:
        phi.set_coeff(k, v)
    return HypersurfaceJet(phi, r=0, level="simplified")


# ---------------------------------------------------------------------------
# step 1: straightening
# ---------------------------------------------------------------------------

def test_straighten_model_is_identity():
    H = model_2d()
    rec, H1, chain, _run = straighten_locus_and_chain(H)
    assert rec.map == MapJet.identity(1, W2, H.M, True)
    assert H1.phi == H.phi
    assert all(c.is_zero() for c in chain)


def test_straighten_kills_low_families():
    H = model_2d(extra=[(((1,), (1,), 1), ONE)])
    rec, H1, chain, _run = straighten_locus_and_chain(H)
    assert not family(H1.phi, (0,), (0,))
    assert not family(H1.phi, (1,), (1,))
    # the output is certified against the map by exact push-forward
    assert push_forward_weighted(H, rec.map).phi == H1.phi


# ---------------------------------------------------------------------------
# step 2: normal coordinates
# ---------------------------------------------------------------------------

def test_normal_coordinates_shear():
    H = model_2d(extra=[(((4,), (0,), 0), ONE), (((0,), (4,), 0), ONE)])
    rec, H2 = normal_coordinates(H)
    assert rec.map.g.coeff(((4,), 0)) == ec(0, -2)
    for k in range(H.M + 1):
        assert not family(H2.phi, (k,), (0,))
        assert not family(H2.phi, (0,), (k,))


def test_normal_coordinates_identity_cases():
    for H in (model_2d(), model_2d(extra=[(((2,), (2,), 0), ONE)])):
        rec, H2 = normal_coordinates(H)
        assert rec.map == MapJet.identity(1, W2, H.M, True)
        assert H2.phi == H.phi


# ---------------------------------------------------------------------------
# step 3: Segre-map normalization
# ---------------------------------------------------------------------------

def test_segre_rescales_cubic_family():
    # Phi_21(u) = 1 + u is brought back to 1 by the real cube-root scaling
    H = model_2d(M=12, extra=[(((2,), (1,), 1), ONE), (((1,), (2,), 1), ONE)])
    rec, H3 = normalize_segre_map(H)
    assert family(H3.phi, (2,), (1,)) == {0: ONE}
    assert H3.level == "prenormal"
    assert push_forward_weighted(H, rec.map).phi == H3.phi
    # the z-component scales by the cube root lambda = (1+u)^(1/3)
    u = RealJet.var_u(1, W2, 12, True)
    lam3 = rec.map.fs[0].restrict_to_graph(RealJet.zero(1, W2, 12)).pow(3)
    z = RealJet.var_z(1, W2, 12, 0, True)
    assert (lam3 - z.pow(3) * (u.one_like() + u)).truncate(12).is_zero()


def test_segre_of_model_is_identity():
    H = model_2d()
    rec, H3 = normalize_segre_map(H)
    assert rec.map == MapJet.identity(1, W2, H.M, True)


# ---------------------------------------------------------------------------
# step 4: frame ODE (higher dimension)
# ---------------------------------------------------------------------------

def test_frame_ode_scalar_phase():
    # a constant 1x1 Hermitian source integrates to exp(-i c u)
    c = QQ(2)
    def source(p, q, d):
        return ec(c) if (p, q, d) == (0, 0, 0) else ec(0)
    C = solve_frame_ode(source, 1, (QQ(1),), 4)
    import math
    expect = {0: ONE, 1: ec(0, -2), 2: ec(-2), 3: ec(0, QQ(4, 3)), 4: ec(QQ(2, 3))}
    for d, v in expect.items():
        assert C[d][0][0] == v


def test_frame_ode_conservation(rng):
    # pseudo-unitarity holds exactly for random Hermitian sources
    m, dmax = 2, 5
    eps = signature_eps(3, 1)
    data = {}
    for d in range(dmax + 1):
        a, b = ec(rng.randint(-3, 3), 0), ec(rng.randint(-3, 3), 0)
        off = rand_ec(rng)
        data[d] = [[a, off], [off.conjugate(), b]]

    def source(p, q, d):
        return data.get(d, [[ec(0)] * m] * m)[p][q]

    C = solve_frame_ode(source, m, eps, dmax)
    for d in range(dmax + 1):
        for p in range(m):
            for q in range(m):
                s = ec(0)
                for d1 in range(d + 1):
                    for k in range(m):
                        s = s + C[d1][k][p].conjugate() * C[d - d1][k][q] * eps[k]
                want = ec(eps[p]) if (p == q and d == 0) else ec(0)
                assert s == want


def test_frame_step_removes_hermitian_family():
    phi = model_phi(2, 1, 12)
    phi.set_coeff(((1, 2), (1, 1), 0), ONE)
    phi.set_coeff(((1, 1), (1, 2), 0), ONE)
    H = HypersurfaceJet(phi, r=1, level="prenormal")
    rec, H4 = orthonormal_frame_ode(H)
    fam = family(H4.phi, (1, 2), (1, 1))
    assert all(v.re == 0 for v in fam.values())
    assert push_forward_weighted(H, rec.map).phi == H4.phi


# ---------------------------------------------------------------------------
# step 5: gauge
# ---------------------------------------------------------------------------

def test_gauge_trivial_source():
    H = model_2d()
    rec, H5, q = gauge_parametrization(H, QQ(1))
    assert dict(q.sorted_terms()) == {((0,), 1): ONE}
    assert rec.map == MapJet.identity(1, W2, H.M, True)


def test_gauge_constant_source_is_exponential():
    # with Im Phi_42 = c the solved parametrization has q' = exp(3 c u);
    # the sign is fixed by the exact transformation law, see
    # test_gauge_transformation_law below
    for c in (QQ(1), QQ(-2), QQ(1, 3)):
        H = model_2d(M=14, extra=[(((4,), (2,), 0), ec(0, c)),
                                  (((2,), (4,), 0), ec(0, -c))])
        rec, H5, q = gauge_parametrization(H, QQ(1))
        assert not family(H5.phi, (4,), (2,))
        qp = q.diff_w()
        # exact ODE residual: q'' = 3 c q'; q is exact through degree
        # M/3, so the residual is certified two degrees lower
        qpp = qp.diff_w()
        assert (qpp - qp.scale(ec(3 * c))).truncate(H.M - 2 * 3).is_zero()
        assert not qp.truncate(6).is_zero()
        assert q.coeff(((0,), 0)) == ec(0)
        assert q.coeff(((0,), 1)) == ONE


def test_gauge_transformation_law():
    # independent oracle for the sign of the gauge ODE: push the surface
    # with Im Phi_42 = c through an arbitrary gauge map and read the family
    c, eps = QQ(1), QQ(1, 7)
    M = 14
    phg = model_phi(1, 0, M)
    phg.set_coeff(((4,), (2,), 0), ec(0, c))
    phg.set_coeff(((2,), (4,), 0), ec(0, -c))
    H = HypersurfaceJet(phg, r=0, level="prenormal")
    w = HoloJet.var_w(1, phg.weights, M, True)
    z = HoloJet.var_z(1, phg.weights, M, 0, True)
    q = w + (w * w).scale(ec(eps))
    qp = w.one_like() + w.scale(ec(2 * eps))
    F = MapJet([z * jet_exp(jet_log(qp).scale(ec(QQ(1, 3))))], q)
    out = push_forward_weighted(H, F)
    # Im Phi*_42(0) = q'(0) c - q''(0)/3 = c - 2 eps / 3
    assert out.phi.coeff(((4,), (2,), 0)).im == c - 2 * eps / 3


def test_gauge_uniqueness_on_normal_input():
    H = model_2d(extra=[(((2,), (2,), 0), ONE)])
    rec, H5, q = gauge_parametrization(H, QQ(1))
    assert rec.map == MapJet.identity(1, W2, H.M, True)


def test_gauge_rejects_bad_derivative():
    from crnormal.errors import DomainError
    with pytest.raises(DomainError):
        gauge_parametrization(model_2d(), QQ(0))
    phi = model_phi(2, 1, 12)
    with pytest.raises(DomainError):
        gauge_parametrization(HypersurfaceJet(phi, r=1, level="prenormal"), QQ(-1))


# ---------------------------------------------------------------------------
# full driver
# ---------------------------------------------------------------------------

def test_convergent_model_identity():
    H = model_2d()
    out = convergent_normalize(H)
    assert out.surface.phi == H.phi
    assert out.map == MapJet.identity(1, W2, H.M, True)
    assert [s.name for s in out.report.steps[-2:]] == ["segre-map", "gauge"] or \
        len(out.report.steps) >= 3


def test_convergent_removes_flagged_family():
    H = model_2d(extra=[(((3,), (2,), 0), ONE), (((2,), (3,), 0), ONE)])
    out = convergent_normalize(H)
    assert (out.surface.phi - model_phi(1, 0, H.M)).truncate(5).is_zero()
    fn = formal_normalize(H)
    assert out.surface.phi == fn.surface.phi
    assert out.map == fn.map


def test_convergent_matches_formal_2d(rng):
    for _ in range(3):
        H = perturb_model_2d(rng, 9, nterms=4)
        out = convergent_normalize(H)
        fn = formal_normalize(H)
        assert out.map == fn.map
        assert out.surface.phi == fn.surface.phi
        _, comp = project_normal_space(out.surface.phi - model_phi(1, 0, 9), 1, 0)
        assert comp.is_zero()


def test_convergent_matches_formal_nd(rng):
    H = perturb_model_nd(rng, 2, 1, 10, nterms=3)
    out = convergent_normalize(H)
    fn = formal_normalize(H)
    assert out.map == fn.map
    assert out.surface.phi == fn.surface.phi


def test_report_composition_and_fields(rng):
    H = perturb_model_2d(rng, 9, nterms=3)
    out = convergent_normalize(H)
    rep = out.report
    assert rep.total_map == out.map
    assert rep.gauge_function is not None
    assert rep.prenormal.level == "prenormal"
    assert [s.name for s in rep.steps][0] in ("adapt", "straighten")


@pytest.fixture
def rng():
    return random.Random(23)
