"""Numerical chain geometry: implicit surfaces, slope fields, tracing."""

import math
import random

import pytest

from crnormal.scalars import QQ, ExactComplex
from crnormal.chains import (AnalyticSurface, levi_determinant_at,
                             levi_matrix_at, local_graph_jet, project_to_sigma,
                             slope_field_tangent, slope_field_transverse,
                             trace_chain)

from conftest import ec


def shifted_parabola_surface(a=QQ(1, 4)):
    """The model pulled back through (z, w) -> (z + a w^2, w).

    Its degenerate chain is the curve z = -a u^2, v = 0.
    """
    S = AnalyticSurface.model(1, 0)
    n1 = S.n + 1
    zs = [{((0,) * i + (1,) + (0,) * (n1 - 1 - i), 0): ec(1)} for i in range(S.n)]
    w = {((0,) * S.n, 1): ec(1)}
    fmap = [dict(zs[0]), dict(w)]
    fmap[0][((0,) * S.n, 2)] = ec(a)
    return S.pullback(fmap)


def test_model_defining_value():
    S = AnalyticSurface.model(1, 0)
    # on the surface: v = 2 Re(z^2 zbar)
    z = 0.3 + 0.2j
    v = 2 * (z * z * z.conjugate()).real
    on = S.defining_value(((z,), 1.7 + 1j * v))
    off = S.defining_value(((z,), 1.7 + 1j * (v + 0.1)))
    assert abs(on) < 1e-15
    assert abs(off) > 1e-3


def test_pullback_is_composition():
    S2 = shifted_parabola_surface(QQ(1, 4))
    z = 0.1 - 0.05j
    w = 0.2 + 0.033j
    base = AnalyticSurface.model(1, 0)
    assert abs(S2.defining_value(((z,), w)) -
               base.defining_value(((z + 0.25 * w * w,), w))) < 1e-14


def test_levi_determinant_vanishes_on_axis():
    S = AnalyticSurface.model(1, 0)
    assert abs(levi_determinant_at(S, ((0.0 + 0.0j,), 0.3 + 0.0j))) < 1e-12
    assert abs(levi_determinant_at(S, ((0.2 + 0.0j,), 0.0j))) > 1e-3


def test_levi_matrix_signature_nd():
    S = AnalyticSurface.model(2, 1)
    L = levi_matrix_at(S, ((0.0j, 0.0j), 0.0j))
    import numpy as np
    lam = np.linalg.eigvalsh(np.array(L, dtype=complex))
    assert abs(lam[0] - 0) < 1e-9 or abs(lam[-1]) > 0  # one zero eigenvalue
    assert sum(1 for x in lam if abs(x) < 1e-9) == 1


def test_projection_reaches_locus():
    S = AnalyticSurface.model(1, 0)
    p = project_to_sigma(S, ((0.05 + 0.2j,), 0.3 + 0.04j))
    assert abs(S.defining_value(p)) < 1e-11
    assert abs(levi_determinant_at(S, p)) < 1e-11
    # points already on the locus stay put
    q0 = ((0.0 + 0.1j,), 0.2 + 0.0j)
    q = project_to_sigma(S, q0)
    assert max(abs(q[0][0] - q0[0][0]), abs(q[1] - q0[1])) < 1e-12


def test_local_graph_jet_reproduces_model():
    S = AnalyticSurface.model(1, 0)
    H = local_graph_jet(S, ((0.0j,), 0.0j), 6)
    assert abs(H.phi.coeff(((2,), (1,), 0)) - 1) < 1e-12
    assert abs(H.phi.coeff(((1,), (2,), 0)) - 1) < 1e-12
    others = [v for k, v in H.phi.c.items()
              if k not in (((2,), (1,), 0), ((1,), (2,), 0)) and abs(v) > 1e-10]
    assert not others


def test_transverse_slope_at_origin():
    S = AnalyticSurface.model(1, 0)
    d = slope_field_transverse(S, ((0.0j,), 0.0j))
    # the chain leaves the origin along Re w
    assert max(abs(x) for x in [d.vector[0], d.vector[1], d.vector[3]]) < 1e-10
    assert abs(abs(d.vector[2]) - 1) < 1e-10


def test_tangent_slope_at_origin():
    S = AnalyticSurface.model(1, 0)
    v = slope_field_tangent(S, ((0.0j,), 0.0j))
    # the kernel-tangent leaf runs along Im z
    assert abs(abs(v[1]) - 1) < 1e-10
    assert max(abs(v[0]), abs(v[2]), abs(v[3])) < 1e-10


def test_transverse_slope_off_origin_curved():
    S = shifted_parabola_surface()
    u0 = 0.05
    p = ((-0.25 * u0 * u0 + 0.0j,), u0 + 0.0j)
    d = slope_field_transverse(S, p)
    # tangent of (z, w) = (-a u^2, u): dz/du = -2 a u, normalized
    tang = [-2 * 0.25 * u0, 0.0, 1.0, 0.0]
    norm = math.sqrt(sum(x * x for x in tang))
    tang = [x / norm for x in tang]
    sign = 1.0 if d.vector[2] > 0 else -1.0
    assert max(abs(sign * d.vector[i] - tang[i]) for i in range(4)) < 1e-8


def test_trace_model_chain_short():
    S = AnalyticSurface.model(1, 0)
    tr = trace_chain(S, ((0.0j,), 0.0j), length=0.05, step=1e-3)
    assert len(tr.points) == 51
    for p in tr.points:
        assert abs(p[0][0]) < 1e-12 and abs(p[1].imag) < 1e-12
        assert abs(S.defining_value(p)) < 1e-9
        assert abs(levi_determinant_at(S, p)) < 1e-7


def test_trace_curved_chain_order_of_accuracy():
    S = shifted_parabola_surface()
    a = 0.25

    def endpoint_error(step):
        tr = trace_chain(S, ((0.0j,), 0.0j), length=0.04, step=step)
        p = tr.points[-1]
        u = p[1].real
        return abs(p[0][0] - (-a * u * u)) + abs(p[1].imag)

    e1 = endpoint_error(4e-3)
    e2 = endpoint_error(2e-3)
    assert e1 < 1e-12
    assert e2 <= e1 / 8 + 1e-14


def test_trace_equivariance_small():
    # retracing the preimage surface and pushing forward agrees pointwise
    S = AnalyticSurface.model(1, 0)
    n1 = 2
    fmap = [{((1, 0), 0): ec(1), ((1, 0), 1): ec(1, 0) * ec(QQ(1, 10))},
            {((0, 0), 1): ec(1)}]  # (z, w) -> (z + 0.1 w z, w)
    Sp = S.pullback(fmap)
    tr0 = trace_chain(S, ((0.0j,), 0.0j), length=0.02, step=1e-3)
    trp = trace_chain(Sp, ((0.0j,), 0.0j), length=0.02, step=1e-3)
    for q, p in zip(tr0.points[:20], trp.points[:20]):
        z, w = p[0][0], p[1]
        img = (z + 0.1 * w * z, w)
        assert abs(img[0] - q[0][0]) < 1e-6 and abs(img[1] - q[1]) < 1e-6


@pytest.fixture
def rng():
    return random.Random(3)
