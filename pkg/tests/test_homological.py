"""Degree-by-degree homological solver, normal-space projection, drivers."""

import random

import pytest

from crnormal.scalars import QQ, ExactComplex
from crnormal.series import RealJet, HoloJet, surface_weights, weights_nd
from crnormal.hypersurface import HypersurfaceJet, model_phi, push_forward_frame
from crnormal.homological import (cm_operator, formal_normalize, in_normal_space,
                                  model_automorphism_search, project_normal_space,
                                  solve_homological)
from crnormal.maps import ModelFrame

from conftest import ONE, I, ec, rand_real_jet, rand_rational

W2 = surface_weights(1)
WN = weights_nd(2)
TWO = ec(2)


def zero2(M=10):
    return RealJet.zero(1, W2, M)


def holo2(M=10):
    return HoloJet.zero(1, W2, M)


def operator_identity(sol, psi, n, r):
    """2L(f, g) + Phi* - Psi, which sound solutions make exactly zero."""
    L = cm_operator(sol.comps, n, r)
    return L.scale(TWO) + sol.npart - psi


# ---------------------------------------------------------------------------
# the linear operator
# ---------------------------------------------------------------------------

def test_operator_on_pure_reparametrization():
    # the operator sends (0, w) to minus the model polynomial
    L = cm_operator((holo2(), HoloJet.var_w(1, W2, 10, True)), 1, 0)
    expect = zero2()
    expect.set_coeff(((2,), (1,), 0), ec(-1))
    expect.set_coeff(((1,), (2,), 0), ec(-1))
    assert (L - expect).is_zero()


def test_operator_on_linear_stretch():
    L = cm_operator((HoloJet.var_z(1, W2, 10, 0, True), holo2()), 1, 0)
    expect = zero2()
    expect.set_coeff(((2,), (1,), 0), ec(QQ(3, 2)))
    expect.set_coeff(((1,), (2,), 0), ec(QQ(3, 2)))
    assert (L - expect).is_zero()


def test_operator_zero_and_linearity(rng):
    assert cm_operator((holo2(), holo2()), 1, 0).is_zero()
    f1 = HoloJet.monomial(1, W2, 10, (3,), 0, ec(1, 2))
    g1 = HoloJet.monomial(1, W2, 10, (2,), 1, ec(0, 1))
    f2 = HoloJet.monomial(1, W2, 10, (0,), 1, ec(2, -1))
    g2 = HoloJet.monomial(1, W2, 10, (4,), 0, ONE)
    a, b = ec(rand_rational(rng)), ec(rand_rational(rng))
    lhs = cm_operator((f1.scale(a) + f2.scale(b), g1.scale(a) + g2.scale(b)), 1, 0)
    rhs = cm_operator((f1, g1), 1, 0).scale(a) + cm_operator((f2, g2), 1, 0).scale(b)
    assert (lhs - rhs).is_zero()


# ---------------------------------------------------------------------------
# normal-space projection
# ---------------------------------------------------------------------------

def test_projection_flags_2d():
    # a pure real (3,2)-family lies entirely in the complement
    p = zero2()
    p.set_coeff(((3,), (2,), 0), ONE)
    p.set_coeff(((2,), (3,), 0), ONE)
    inN, comp = project_normal_space(p, 1, 0)
    assert inN.is_zero() and (comp - p).is_zero()
    # the imaginary (3,2)-family is unconstrained
    q = zero2()
    q.set_coeff(((3,), (2,), 0), I)
    q.set_coeff(((2,), (3,), 0), -I)
    inN, comp = project_normal_space(q, 1, 0)
    assert comp.is_zero() and (inN - q).is_zero()
    # and so is the (2,2)-family
    m = RealJet.monomial(1, W2, 10, (2,), (2,), 0, ONE)
    inN, comp = project_normal_space(m, 1, 0)
    assert comp.is_zero()


def test_projection_is_a_splitting(rng):
    psi = rand_real_jet(rng, 1, W2, 10, 4)
    inN, comp = project_normal_space(psi, 1, 0)
    assert (inN + comp - psi).is_zero()
    assert in_normal_space(inN, 1, 0)
    inN2, comp2 = project_normal_space(inN, 1, 0)
    assert comp2.is_zero() and (inN2 - inN).is_zero()


# ---------------------------------------------------------------------------
# the solver, planar case
# ---------------------------------------------------------------------------

def test_solve_zero():
    sol = solve_homological(zero2(), 1, 0)
    assert all(c.is_zero() for c in sol.comps)
    assert sol.npart.is_zero()


def test_solve_pure_holomorphic_source():
    psi = zero2()
    psi.set_coeff(((4,), (0,), 0), ONE)
    psi.set_coeff(((0,), (4,), 0), ONE)
    sol = solve_homological(psi, 1, 0)
    f, g = sol.comps
    assert f.is_zero()
    assert dict(g.sorted_terms()) == {((4,), 0): -I}
    assert sol.npart.is_zero()
    assert operator_identity(sol, psi, 1, 0).is_zero()


def test_solve_mixed_weight_five_source():
    # frozen solution, certified by the exact operator identity below
    psi = zero2()
    psi.set_coeff(((4,), (1,), 0), ONE)
    psi.set_coeff(((1,), (4,), 0), ONE)
    sol = solve_homological(psi, 1, 0)
    f, g = sol.comps
    assert dict(f.sorted_terms()) == {((0,), 1): ec(0, QQ(1, 10)),
                                      ((3,), 0): ec(QQ(3, 5))}
    assert dict(g.sorted_terms()) == {((2,), 1): ec(QQ(1, 10))}
    assert sol.npart.is_zero()
    assert operator_identity(sol, psi, 1, 0).is_zero()


def test_soundness_and_uniqueness_2d(rng):
    for _ in range(10):
        psi = rand_real_jet(rng, 1, W2, 10, 4)
        sol = solve_homological(psi, 1, 0)
        assert operator_identity(sol, psi, 1, 0).is_zero()
        _, comp = project_normal_space(sol.npart, 1, 0)
        assert comp.is_zero()
        again = solve_homological(sol.npart, 1, 0)
        assert all(c.is_zero() for c in again.comps)
        assert (again.npart - sol.npart).is_zero()


def test_roundtrip_2d(rng):
    for _ in range(10):
        psi = rand_real_jet(rng, 1, W2, 10, 4)
        sol = solve_homological(psi, 1, 0)
        source = cm_operator(sol.comps, 1, 0).scale(TWO)
        back = solve_homological(source, 1, 0)
        assert all((a - b).is_zero() for a, b in zip(back.comps, sol.comps))
        assert back.npart.is_zero()


# ---------------------------------------------------------------------------
# the solver, higher dimension
# ---------------------------------------------------------------------------

def test_solve_nd_diagonal_kernel_source():
    # Psi = c z_n zbar_n u is absorbed by Re f^n(0, u) = c u / 4
    c = QQ(2)
    psi = RealJet.zero(2, WN, 12)
    psi.set_coeff(((0, 1), (0, 1), 1), ec(c))
    sol = solve_homological(psi, 2, 1)
    fn = sol.comps[1]
    assert fn.coeff(((0, 0), 1)) == ec(c / 4)
    assert operator_identity(sol, psi, 2, 1).is_zero()
    _, comp = project_normal_space(sol.npart, 2, 1)
    assert comp.is_zero()


def test_solve_nd_trace_source():
    # Psi = z1 zbar1 z_n zbar_n forces Im f^n(0, u) = -u/4 and leaves no
    # trace-family residue
    psi = RealJet.zero(2, WN, 12)
    psi.set_coeff(((1, 1), (1, 1), 0), ONE)
    sol = solve_homological(psi, 2, 1)
    fn = sol.comps[1]
    assert fn.coeff(((0, 0), 1)) == ec(0, QQ(-1, 4))
    assert not any(k[0] == (1, 1) and k[1] == (1, 1) for k in sol.npart.c
                   if not sol.npart.c[k].is_zero())
    assert operator_identity(sol, psi, 2, 1).is_zero()


def test_soundness_nd(rng):
    for _ in range(5):
        psi = rand_real_jet(rng, 2, WN, 12, 7)
        sol = solve_homological(psi, 2, 1)
        assert operator_identity(sol, psi, 2, 1).is_zero()
        _, comp = project_normal_space(sol.npart, 2, 1)
        assert comp.is_zero()
        # the residual respects the trace structure of the normal space
        assert in_normal_space(sol.npart, 2, 1)


# ---------------------------------------------------------------------------
# the full formal driver
# ---------------------------------------------------------------------------

def test_normalize_model_is_fixed():
    H = HypersurfaceJet(model_phi(1, 0, 10), r=0, level="simplified")
    out = formal_normalize(H)
    assert out.surface.phi == H.phi
    ident = out.map.identity(1, H.phi.weights, H.M, True)
    assert out.map == ident
    assert out.residual_certified


def test_normalize_fixed_point_inside_normal_space():
    phi = model_phi(1, 0, 10)
    phi.set_coeff(((2,), (2,), 0), ONE)
    H = HypersurfaceJet(phi, r=0, level="simplified")
    out = formal_normalize(H)
    assert out.surface.phi == phi


def test_normalize_removes_flagged_family():
    phi = model_phi(1, 0, 10)
    phi.set_coeff(((3,), (2,), 0), ONE)
    phi.set_coeff(((2,), (3,), 0), ONE)
    H = HypersurfaceJet(phi, r=0, level="simplified")
    out = formal_normalize(H)
    # through weight 5 the result is the bare model
    diff = out.surface.phi - model_phi(1, 0, 10)
    assert diff.truncate(5).is_zero()


def test_frame_equivariance(rng):
    phi = model_phi(1, 0, 8)
    phi.set_coeff(((2,), (2,), 1), ONE)
    phi.set_coeff(((3,), (2,), 0), ec(QQ(1, 2), QQ(1, 3)))
    phi.set_coeff(((2,), (3,), 0), ec(QQ(1, 2), QQ(-1, 3)))
    H = HypersurfaceJet(phi, r=0, level="simplified")
    fr = ModelFrame(1, 0, QQ(2))
    N1 = formal_normalize(H).surface
    N2 = formal_normalize(push_forward_frame(H, fr)).surface
    assert push_forward_frame(N1, fr).phi == N2.phi


# ---------------------------------------------------------------------------
# rigidity of the model
# ---------------------------------------------------------------------------

def test_model_rigidity_small():
    rep = model_automorphism_search(1, 0, 7)
    assert all(d == 0 for d in rep.kernel_dims.values())
    assert rep.verified_frames >= 1
    repn = model_automorphism_search(2, 1, 9)
    assert all(d == 0 for d in repn.kernel_dims.values())


@pytest.fixture
def rng():
    return random.Random(11)
