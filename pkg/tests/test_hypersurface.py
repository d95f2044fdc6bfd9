"""Geometry of a hypersurface jet: invariants, adaptation, degeneracy set."""

import random

import pytest

from crnormal.errors import GenericityError, ModeError
from crnormal.scalars import QQ, ExactComplex
from crnormal.series import RealJet, surface_weights, unit_weights, weights_nd
from crnormal.hypersurface import (HypersurfaceJet, adapt_preliminary,
                                   check_generic_degeneracy, degeneracy_set_jet,
                                   invariants_at_origin, levi_determinant,
                                   model_phi, push_forward_frame,
                                   push_forward_weighted)
from crnormal.maps import MapJet, ModelFrame

from conftest import ONE, I, ec, family


def graph_2d(extra, M=7):
    """v = 2Re(z^2 zbar) + extra terms, on the plain-degree grid."""
    phi = RealJet.zero(1, unit_weights(1), M)
    for (a, b) in [((2,), (1,)), ((1,), (2,))]:
        phi.set_coeff((a, b, 0), ONE)
    for k, v in extra:
        phi.set_coeff(k, v)
    return HypersurfaceJet(phi, r=0, level="raw")


def test_model_invariants_2d():
    H = HypersurfaceJet(model_phi(1, 0, 9, weights=unit_weights(1)), r=0, level="raw")
    inv = invariants_at_origin(H)
    assert inv.levi_matrix == [[ec(0)]]
    assert inv.kernel == [[ONE]]
    assert inv.cubic == ONE
    assert inv.generic


def test_invariants_mixed_signature():
    # v = |z1|^2 - |z2|^2 + 2Re(z3^2 zbar3): kernel is the z3 axis
    phi = RealJet.zero(3, unit_weights(3), 6)
    phi.set_coeff(((1, 0, 0), (1, 0, 0), 0), ONE)
    phi.set_coeff(((0, 1, 0), (0, 1, 0), 0), ec(-1))
    phi.set_coeff(((0, 0, 2), (0, 0, 1), 0), ONE)
    phi.set_coeff(((0, 0, 1), (0, 0, 2), 0), ONE)
    H = HypersurfaceJet(phi, r=1, level="raw")
    inv = invariants_at_origin(H)
    assert inv.kernel_dim == 1
    assert inv.kernel == [[ec(0), ec(0), ONE]]
    assert inv.signature == (1, 1)
    assert inv.cubic == ONE
    assert inv.generic
    assert check_generic_degeneracy(H).generic


def test_sphere_is_not_generic():
    phi = RealJet.monomial(1, unit_weights(1), 6, (1,), (1,), 0, ONE)
    H = HypersurfaceJet(phi, r=None, level="raw")
    inv = invariants_at_origin(H)
    assert inv.kernel_dim == 0
    assert not inv.generic
    with pytest.raises(GenericityError):
        check_generic_degeneracy(H)


def test_adapt_cubic_shear():
    # v = 2Re(z^2 zbar) + 2Re(z^3) is flattened by w -> w - 2i z^3
    H = graph_2d([(((3,), (0,), 0), ONE), (((0,), (3,), 0), ONE)])
    Hs, F, r = adapt_preliminary(H)
    assert r == 0
    assert dict(F.g.sorted_terms()) == {((0,), 1): ONE, ((3,), 0): ec(0, -2)}
    assert dict(F.fs[0].sorted_terms()) == {((1,), 0): ONE}
    assert Hs.phi == model_phi(1, 0, Hs.M, weights=Hs.phi.weights)


def test_adapt_quadratic_shear():
    # adding Re(z^2) is flattened by w -> w - i z^2
    H = graph_2d([(((2,), (0,), 0), ec(QQ(1, 2))), (((0,), (2,), 0), ec(QQ(1, 2)))])
    Hs, F, r = adapt_preliminary(H)
    assert F.g.coeff(((2,), 0)) == ec(0, -1)
    assert Hs.phi == model_phi(1, 0, Hs.M, weights=Hs.phi.weights)


def test_adapt_idempotent():
    H = graph_2d([(((3,), (0,), 0), ONE), (((0,), (3,), 0), ONE),
                  (((2,), (2,), 0), ONE)])
    Hs, F, _ = adapt_preliminary(H)
    regraded = HypersurfaceJet(Hs.phi.with_weights(unit_weights(1), Hs.M),
                               r=0, level="raw")
    Hs2, F2, _ = adapt_preliminary(regraded)
    assert Hs2.phi == Hs.phi
    assert F2 == MapJet.identity(1, unit_weights(1), Hs.M, True)


def test_adapt_rejects_float_and_nongeneric():
    phi = RealJet.monomial(1, unit_weights(1), 6, (1,), (1,), 0, ONE)
    with pytest.raises(GenericityError):
        adapt_preliminary(HypersurfaceJet(phi, r=None, level="raw"))
    fphi = RealJet.zero(1, unit_weights(1), 6, exact=False)
    fphi.set_coeff(((2,), (1,), 0), 1.0)
    fphi.set_coeff(((1,), (2,), 0), 1.0)
    with pytest.raises(ModeError):
        adapt_preliminary(HypersurfaceJet(fphi, r=0, level="raw"))


def test_degeneracy_set_of_model():
    # the model locus is the flat plane Re z = 0, v = 0
    S = degeneracy_set_jet(graph_2d([]))
    assert S.chi.is_zero()
    assert S.tau.is_zero()


def test_degeneracy_set_perturbed_linear_term():
    # v = 2Re(z^2 zbar) + u z zbar tilts the locus: chi = -u/4 + higher
    H = graph_2d([(((1,), (1,), 1), ONE)])
    S = degeneracy_set_jet(H)
    assert S.chi.coeff(((0,), (0,), 1)) == ec(QQ(-1, 4))
    # float oracle: root of the Levi determinant along y = 0 at small u
    lam = levi_determinant(H)
    u = 1e-3
    lo, hi = -1e-2, 1e-2
    flo = lam.eval_float([lo], u).real
    for _ in range(80):
        mid = (lo + hi) / 2
        fm = lam.eval_float([mid], u).real
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    x_root = (lo + hi) / 2
    x_jet = S.chi.eval_float([0.0], u).real
    assert abs(x_root - x_jet) < 1e-9


def test_push_forward_dilation():
    # (z, w) -> (2z, 8w) rescales the model family by 8 / 8 = 1... the
    # image of v = 2Re(z^2 zbar) under w* = 8w, z* = 2z keeps the model shape
    M = 9
    H = HypersurfaceJet(model_phi(1, 0, M), r=0, level="simplified")
    fr = ModelFrame(1, 0, QQ(2))
    H2 = push_forward_frame(H, fr)
    assert H2.phi == model_phi(1, 0, M)


def test_push_forward_frame_scales_higher_families():
    M = 10
    phi = model_phi(1, 0, M)
    phi.set_coeff(((2,), (2,), 0), ONE)  # weight-6 family
    H = HypersurfaceJet(phi, r=0, level="simplified")
    lam = QQ(2)
    H2 = push_forward_frame(H, ModelFrame(1, 0, lam))
    # v* = lam^3 v, z* = lam z: the z^2 zbar^2 coefficient picks up
    # lam^3 / lam^4 = 1/2
    assert H2.phi.coeff(((2,), (2,), 0)) == ec(QQ(1, 2))


def test_validate_rejects_unreal():
    phi = RealJet.zero(1, surface_weights(1), 6)
    phi.set_coeff(((2,), (1,), 0), ONE)
    with pytest.raises(Exception):
        HypersurfaceJet(phi, r=0, level="simplified").validate()
