"""Shared fixtures and generators for the test suite.

All random data is drawn from seeded `random.Random` instances so every
run is reproducible; exact inputs use Gaussian-rational coefficients.
"""

import itertools
import random

import pytest

from crnormal.scalars import QQ, ExactComplex
from crnormal.series import RealJet, surface_weights, unit_weights, weights_nd
from crnormal.hypersurface import HypersurfaceJet, model_phi


def ec(re, im=0):
    return ExactComplex(QQ(re), QQ(im))


ONE = ec(1)
I = ec(0, 1)


def rand_rational(rng, num=4, den=3):
    return QQ(rng.randint(-num, num), rng.randint(1, den))


def rand_ec(rng, num=4, den=3):
    return ExactComplex(rand_rational(rng, num, den), rand_rational(rng, num, den))


def real_keys_in_range(n, weights, M, lo, max_deg=6, max_u=5):
    """All real-jet keys with weight in [lo, M]."""
    probe = RealJet.zero(n, weights, M)
    keys = []
    for a in itertools.product(range(max_deg), repeat=n):
        for b in itertools.product(range(max_deg), repeat=n):
            for j in range(max_u):
                k = (a, b, j)
                if lo <= probe.key_weight(k) <= M:
                    keys.append(k)
    return keys


def rand_real_jet(rng, n, weights, M, lo, nterms=8):
    """A random exact real jet supported in weights [lo, M]."""
    J = RealJet.zero(n, weights, M)
    keys = real_keys_in_range(n, weights, M, lo)
    for (a, b, j) in rng.sample(keys, min(nterms, len(keys))):
        c = rand_ec(rng)
        J.set_coeff((a, b, j), J.coeff((a, b, j)) + c)
        J.set_coeff((b, a, j), J.coeff((b, a, j)) + c.conjugate())
    return J


def perturb_model_2d(rng, M, nterms=5, lo=7):
    """A random exact perturbation of the 2D model, mixed-degree terms only."""
    phi = model_phi(1, 0, M)
    keys = [k for k in real_keys_in_range(1, phi.weights, M, lo)
            if k[0][0] >= 1 and k[1][0] >= 1]
    for (a, b, j) in rng.sample(keys, min(nterms, len(keys))):
        c = rand_ec(rng, 3, 4)
        phi.set_coeff((a, b, j), phi.coeff((a, b, j)) + c)
        phi.set_coeff((b, a, j), phi.coeff((b, a, j)) + c.conjugate())
    return HypersurfaceJet(phi, r=0, level="simplified")


def perturb_model_nd(rng, n, r, M, nterms=5, lo=7):
    """A random exact perturbation of the higher-dimensional model."""
    phi = model_phi(n, r, M)
    keys = [k for k in real_keys_in_range(n, phi.weights, M, lo, max_deg=4, max_u=3)
            if sum(k[0]) >= 1 and sum(k[1]) >= 1]
    for (a, b, j) in rng.sample(keys, min(nterms, len(keys))):
        c = rand_ec(rng, 3, 4)
        phi.set_coeff((a, b, j), phi.coeff((a, b, j)) + c)
        phi.set_coeff((b, a, j), phi.coeff((b, a, j)) + c.conjugate())
    return HypersurfaceJet(phi, r=r, level="simplified")


def family(jet, a, b):
    """The u-coefficient series {j: coeff} of one (a, b) monomial family."""
    return {k[2]: v for k, v in jet.c.items()
            if k[0] == tuple(a) and k[1] == tuple(b) and not _zero(v)}


def _zero(v):
    return v.is_zero() if hasattr(v, "is_zero") else v == 0


@pytest.fixture
def rng():
    return random.Random(20260826)
