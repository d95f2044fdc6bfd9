"""Truncated holomorphic maps and model-frame decomposition."""

import random

import pytest

from crnormal.errors import DomainError
from crnormal.scalars import QQ, ExactComplex
from crnormal.series import HoloJet, surface_weights, weights_nd
from crnormal.maps import (MapJet, ModelFrame, decompose_map, frame_inverse,
                           invert_matrix, rho_admissible, signature_eps)

from conftest import ONE, I, ec

W2 = surface_weights(1)
WN = weights_nd(2)


def test_identity_compose_inverse():
    ident = MapJet.identity(1, W2, 10, True)
    assert ident.compose(ident) == ident
    F = MapJet([HoloJet.var_z(1, W2, 10, 0, True)
                + HoloJet.monomial(1, W2, 10, (0,), 1, ec(0, QQ(1, 3)))],
               HoloJet.var_w(1, W2, 10, True)
               + HoloJet.monomial(1, W2, 10, (4,), 0, ec(1, 1)))
    G = F.inverse()
    assert F.compose(G) == ident
    assert G.compose(F) == ident


def test_compose_associative():
    ident = MapJet.identity(1, W2, 10, True)
    z = HoloJet.var_z(1, W2, 10, 0, True)
    w = HoloJet.var_w(1, W2, 10, True)
    F = MapJet([z + HoloJet.monomial(1, W2, 10, (2,), 0, I)], w)
    G = MapJet([z], w + HoloJet.monomial(1, W2, 10, (4,), 0, ONE))
    H = MapJet([z.scale(ec(2))], w.scale(ec(8)))
    assert F.compose(G).compose(H) == F.compose(G.compose(H))


def test_frame_to_map_shapes():
    fr = ModelFrame(1, 0, QQ(2))
    F = fr.to_map(10, True)
    assert F.fs[0].coeff(((1,), 0)) == ec(2)
    assert F.g.coeff(((0,), 1)) == ec(8)
    frn = ModelFrame(3, 1, QQ(3), rho=1,
                     C=[[ONE, ec(0)], [ec(0), ONE]])
    Fn = frn.to_map(12, True)
    # block scales: lam^3 on the kernel-orthogonal part, lam^2 and lam^6
    assert Fn.fs[0].coeff(((1, 0, 0), 0)) == ec(27)
    assert Fn.fs[2].coeff(((0, 0, 1), 0)) == ec(9)
    assert Fn.g.coeff(((0, 0, 0), 1)) == ec(729)


def test_decompose_pure_dilation():
    fr = ModelFrame(1, 0, QQ(2))
    F = fr.to_map(10, True)
    frame, rest = decompose_map(F)
    assert frame.lam == QQ(2)
    assert rest == MapJet.identity(1, W2, 10, True)


def test_decompose_keeps_normalized_tail():
    z = HoloJet.var_z(1, W2, 10, 0, True)
    w = HoloJet.var_w(1, W2, 10, True)
    F = MapJet([z + HoloJet.monomial(1, W2, 10, (2,), 0, ONE)], w)
    frame, rest = decompose_map(F)
    assert frame.lam == QQ(1)
    assert rest == F


def test_decompose_nd_frame():
    lam = QQ(2)
    # swapping the two axes of a (1, -1) form reverses its sign: rho = -1
    C = [[ec(0), ONE], [ec(-1), ec(0)]]
    fr = ModelFrame(3, 1, lam, rho=-1, C=C)
    F = fr.to_map(12, True)
    frame, rest = decompose_map(F)
    assert frame.lam == lam and frame.rho == -1
    assert frame.C == C
    assert rest == MapJet.identity(3, F.fs[0].weights, 12, True)


def test_decompose_rejects_non_frame_linear_part():
    z = HoloJet.var_z(1, W2, 10, 0, True)
    w = HoloJet.var_w(1, W2, 10, True)
    with pytest.raises(DomainError):
        decompose_map(MapJet([z.scale(ec(2))], w))  # dilation weights mismatch


def test_rho_admissibility_from_signature():
    # reversing the Hermitian form needs a balanced signature
    assert rho_admissible(3, 1)       # eps = (1, -1)
    assert not rho_admissible(3, 2)   # eps = (1, 1)
    assert not rho_admissible(2, 1)


def test_frame_inverse_and_matrix_inverse(rng):
    fr = ModelFrame(1, 0, QQ(3, 2))
    fi = frame_inverse(fr)
    assert fr.to_map(10, True).compose(fi.to_map(10, True)) == \
        MapJet.identity(1, W2, 10, True)
    A = [[ec(rng.randint(1, 4)), ec(rng.randint(-3, 3))],
         [ec(rng.randint(-3, 3)), ec(rng.randint(5, 9))]]
    B = invert_matrix(A)
    prod = [[sum((A[i][k] * B[k][j] for k in range(2)), ec(0))
             for j in range(2)] for i in range(2)]
    assert prod == [[ONE, ec(0)], [ec(0), ONE]]


def test_normalized_class_predicate():
    ident = MapJet.identity(1, W2, 10, True)
    assert ident.is_normalized_class()
    stretched = ModelFrame(1, 0, QQ(2)).to_map(10, True)
    assert not stretched.is_normalized_class()


@pytest.fixture
def rng():
    return random.Random(5)
