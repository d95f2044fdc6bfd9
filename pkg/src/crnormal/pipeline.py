"""Convergent normalization as an explicit composition of geometric steps.

Each step is an exact jet transformation of a simplified hypersurface:

1. straighten the Levi-degeneracy data and the degenerate chain,
2. pass to normal coordinates (no purely holomorphic graph terms),
3. normalize the Segre map (prenormal form),
4. choose an orthonormal frame along the chain (higher dimensions only),
5. fix the chain parametrization by a gauge reparametrization.

All transformations are normalized-class jets on the anisotropic grid, so
every push forward is exact and the composed map is certified against the
final surface.  The degenerate chain in step 1 is determined degree by
degree by probing: the coefficient conditions characterizing the chain
respond affinely to the curve coefficient of the matching degree, so one
exact Newton step per degree suffices.  The later steps never touch those
coefficient families, so their vanishing on the output is a genuine
consequence of the chain choice.
"""

from dataclasses import dataclass

from .errors import (
    ConsistencyError,
    DomainError,
    GenericityError,
    ModeError,
    StructuralError,
)
from .scalars import EC_I, EC_ONE, EC_ZERO, QQ, ExactComplex, rational_root
from .series import (
    HoloJet,
    RealJet,
    jet_exp,
    jet_log,
    jet_pow,
    subst_real,
    unit_weights,
)
from .maps import MapJet, ModelFrame, signature_eps
from .hypersurface import (
    adapt_preliminary,
    degeneracy_set_jet,
    levi_matrix_scaled,
    model_phi,
    push_forward_frame,
    push_forward_weighted,
)
from .homological import project_normal_space
from .linalg import ExactLU, invert_matrix


# ---------------------------------------------------------------------------
# small jet utilities
# ---------------------------------------------------------------------------

def _holo_zero(H):
    return HoloJet.zero(H.n, H.phi.weights, H.M, H.exact)


def _w_jet(H, coeffs):
    """Holomorphic jet in w only, from {degree: coefficient}."""
    out = _holo_zero(H)
    zv = (0,) * H.n
    for j, v in coeffs.items():
        v = ExactComplex.of(v)
        if not v.is_zero():
            out.c[(zv, j)] = v
    return out


def _family_w(phi, a, b):
    """u-coefficient series {j: c} of one (a, b) monomial family."""
    out = {}
    for (ka, kb, j), v in phi.c.items():
        if ka == a and kb == b:
            out[j] = v
    return out


def _b_zero_part(phi, linear_only=False):
    """Purely holomorphic graph part sum_{a != 0} c z^a w^j; with
    linear_only, just the z-linear families."""
    n = phi.n
    zv = (0,) * n
    out = HoloJet.zero(n, phi.weights, phi.M, phi.exact)
    for (a, b, j), v in phi.c.items():
        if b != zv or a == zv:
            continue
        if linear_only and sum(a) != 1:
            continue
        out.c[(a, j)] = v
    return out


def _shear_map(H, G):
    """(z, w) -> (z, w + G)."""
    ident = MapJet.identity(H.n, H.phi.weights, H.M, H.exact)
    return MapJet(ident.fs, ident.g + G)


def _vars(H):
    n = H.n
    weights, M, exact = H.phi.weights, H.M, H.exact
    zs = [HoloJet.var_z(n, weights, M, i, exact) for i in range(n)]
    return zs, HoloJet.var_w(n, weights, M, exact)


def _antider_w(jet):
    """Antiderivative in w with zero constant term (jet in w only)."""
    out = jet._like({})
    zv = (0,) * jet.n
    for (a, k), v in jet.c.items():
        if a != zv:
            raise StructuralError("antiderivative needs a jet in w only")
        if (k + 1) * jet.wu <= jet.M:
            out.c[(zv, k + 1)] = v * ExactComplex(QQ(1, k + 1))
    return out


def _cube_split_root(a):
    """lambda with lambda^2 conj(lambda) = a, for a jet in w with a(0) = 1:
    lambda = exp(Re(log a)/3 + i Im(log a))."""
    s = jet_log(a)
    arg = s._like({})
    for k, v in s.c.items():
        arg.c[k] = ExactComplex(v.re / 3, v.im)
    return jet_exp(arg)


def _identity(H):
    return MapJet.identity(H.n, H.phi.weights, H.M, H.exact)


def _compose_all(maps, H):
    total = _identity(H)
    for m in maps:
        total = m.compose(total)
    return total


def _push_if(H, F):
    if F == _identity(H):
        return H
    return push_forward_weighted(H, F)


def _assert_family_zero(phi, pred, label):
    for key, v in phi.c.items():
        if pred(key) and not v.is_zero():
            raise ConsistencyError("family %s is not zero at %r" % (label, key))


# ---------------------------------------------------------------------------
# step records and reports
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    name: str
    map: MapJet
    postconditions: tuple


@dataclass
class PipelineReport:
    steps: list
    chain_curve: tuple  # z-components of the chain as jets in w
    gauge_function: object  # q(w)
    prenormal: object  # surface after steps 1-4
    total_map: MapJet = None


@dataclass
class ConvergentNormalization:
    map: MapJet
    surface: object
    report: PipelineReport


# ---------------------------------------------------------------------------
# step 1 pieces (n = 1)
# ---------------------------------------------------------------------------

def _flatten_2d(H):
    """Map the Levi-degeneracy graph Re z = chi(Im z, u), v = tau onto the
    plane {Re z = 0, Im w = 0} by the inverse of its complexified
    parametrization (composed with y -> iy to keep the leading part)."""
    sigma = degeneracy_set_jet(H)
    chi, tau = sigma.chi, sigma.tau
    if chi.is_zero() and tau.is_zero():
        return _identity(H), H
    weights, M, exact = H.phi.weights, H.M, H.exact

    def as_holo(rjet):
        out = HoloJet.zero(1, weights, M, exact)
        for (a, b, j), v in rjet.c.items():
            if b != (0,):
                raise ConsistencyError("degeneracy graph jet has conjugate keys")
            out.c[(a, j)] = v
        return out

    (y,), w = _vars(H)
    param = MapJet([as_holo(chi) + y.scale(EC_I)], w + as_holo(tau).scale(EC_I))
    flat = MapJet.from_linear([[EC_I, EC_ZERO], [EC_ZERO, EC_ONE]], 1, weights, M, exact)
    theta = flat.compose(param.inverse())
    if not theta.is_normalized_class():
        raise ConsistencyError("degeneracy-set flattening left the normalized class")
    return theta, push_forward_weighted(H, theta)


def _tangent_kill(H, flat_plane):
    """Kill the z-linear purely holomorphic graph terms so the complex
    tangent spaces along the straightened chain become {w = 0}.  With a
    flat degeneracy plane (n = 1) the coefficients must be real and the
    killing shear preserves the plane."""
    cur = H
    maps = []
    last = None
    for _ in range(H.M + 2):
        A = _b_zero_part(cur.phi, linear_only=True)
        if A.is_zero():
            break
        mw = A.min_weight()
        if last is not None and mw <= last:
            raise ConsistencyError("tangent alignment did not make progress")
        last = mw
        if flat_plane:
            for v in A.c.values():
                if not v.is_real():
                    raise ConsistencyError(
                        "flat degeneracy plane left a non-real tangent tilt")
        F = _shear_map(cur, A.scale(ExactComplex(0, -2)))
        maps.append(F)
        cur = push_forward_weighted(cur, F)
    else:
        raise ConsistencyError("tangent alignment did not terminate")
    return maps, cur


def _chain_shift_2d(H, ycoeffs):
    """(z, w) -> (z - i y(w), w) with real coefficients y_d."""
    coeffs = {d: ExactComplex(0, -yd) for d, yd in ycoeffs.items() if yd != 0}
    if not coeffs:
        return _identity(H)
    zs, w = _vars(H)
    return MapJet([zs[0] + _w_jet(H, coeffs)], w)


def _step1_2d_asserts(H):
    phi = H.phi
    _assert_family_zero(phi, lambda k: k[0] == (0,) and k[1] == (0,), "pure-u")
    _assert_family_zero(
        phi, lambda k: (k[0], k[1]) in (((1,), (0,)), ((0,), (1,))), "tangent")
    _assert_family_zero(phi, lambda k: k[0] == (1,) and k[1] == (1,), "Levi-trace")
    sigma = degeneracy_set_jet(H)
    if not (sigma.chi.is_zero() and sigma.tau.is_zero()):
        raise ConsistencyError("degeneracy set is not flat after straightening")


# ---------------------------------------------------------------------------
# step 1 pieces (n > 1)
# ---------------------------------------------------------------------------

def _curve_shift_nd(H, zcoeffs):
    """Straighten the curve u -> (gamma(u), u + i v(u)) onto the axis,
    where gamma is given per component and v = Phi along the curve."""
    n = H.n
    weights, M, exact = H.phi.weights, H.M, H.exact
    gam = [_w_jet(H, comp) for comp in zcoeffs]
    if all(g.is_zero() for g in gam):
        return _identity(H)
    zv = (0,) * n
    Zs = []
    for g in gam:
        rj = RealJet.zero(n, weights, M, exact)
        for (a, k), v in g.c.items():
            rj.c[(a, zv, k)] = v
        Zs.append(rj)
    U = RealJet.var_u(n, weights, M, exact)
    vcurve = subst_real(H.phi, Zs, [Z.conjugate() for Z in Zs], U)
    height = {}
    for (a, b, j), v in vcurve.c.items():
        if a != zv or b != zv:
            raise ConsistencyError("curve height is not a function of u")
        height[j] = v
    zs, w = _vars(H)
    wmap = MapJet(list(zs), w + _w_jet(H, height).scale(EC_I))
    sigma_map = wmap.inverse()  # reparametrizes u + i v(u) -> u
    sg = sigma_map.g
    fs = [zs[i] - gam[i].eval_holo(list(zs), sg) for i in range(n)]
    F = MapJet(fs, sg)
    if not F.is_normalized_class():
        raise ConsistencyError("curve straightening left the normalized class")
    return F


def _levi_along_axis(H):
    """Scaled Levi matrix restricted to z = 0, as u-coefficient dicts."""
    L = levi_matrix_scaled(H)
    n = H.n
    return [[L[p][q].subst_z0() for q in range(n)] for p in range(n)]


def _kernel_align_nd(H):
    """Solve the Levi-kernel field along the straightened curve from the
    nondegenerate block, align it with the last coordinate direction, and
    report the last-row residual (zero iff the curve lies inside the
    Levi-degeneracy set)."""
    n = H.n
    m = n - 1
    L = _levi_along_axis(H)
    dmax = H.M // H.phi.wu

    def ent(p, q, j):
        return L[p][q].get(j, EC_ZERO)

    A0inv = invert_matrix([[ent(p, q, 0) for q in range(m)] for p in range(m)])
    kv = [{} for _ in range(m)]  # kernel components over the block
    for d in range(dmax + 1):
        rhs = [ent(p, n - 1, d) for p in range(m)]
        for e in range(d):
            for p in range(m):
                for q in range(m):
                    cq = kv[q].get(e)
                    if cq is not None:
                        rhs[p] = rhs[p] + ent(p, q, d - e) * cq
        for p in range(m):
            s = EC_ZERO
            for q in range(m):
                s = s + A0inv[p][q] * rhs[q]
            if not s.is_zero():
                kv[p][d] = -s
    for p in range(m):
        if 0 in kv[p]:
            raise ConsistencyError("Levi kernel is not aligned at the origin")
    rres = {}
    for d in range(dmax + 1):
        acc = ent(n - 1, n - 1, d)
        for q in range(m):
            for e, cq in kv[q].items():
                if e <= d:
                    acc = acc + ent(n - 1, q, d - e) * cq
        if not acc.is_zero():
            rres[d] = acc
    # With z_p -> z_p - kappa(w) z_n the Levi column picks up
    # -conj(kappa(u)) L_pp, so the map carries the conjugated kernel field.
    kjets = [_w_jet(H, {d: v.conjugate() for d, v in comp.items()})
             for comp in kv]
    if all(kj.is_zero() for kj in kjets):
        return _identity(H), H, rres
    zs, w = _vars(H)
    fs = [zs[p] - kjets[p] * zs[n - 1] for p in range(m)] + [zs[n - 1]]
    F = MapJet(fs, w)
    if not F.is_normalized_class():
        raise ConsistencyError("kernel alignment left the normalized class")
    return F, push_forward_weighted(H, F), rres


# ---------------------------------------------------------------------------
# step 2: normal coordinates
# ---------------------------------------------------------------------------

def normal_coordinates(H):
    """The shear z* = z, w* = w + g(z, w), g(0, w) = 0 removing all purely
    holomorphic graph terms."""
    zv = (0,) * H.n
    for (a, b, j), v in H.phi.c.items():
        if a == zv and b == zv and not v.is_zero():
            raise DomainError("normal coordinates need a graph containing the chain")
    cur = H
    maps = []
    last = None
    for _ in range(H.M + 2):
        A = _b_zero_part(cur.phi)
        if A.is_zero():
            break
        mw = A.min_weight()
        if last is not None and mw <= last:
            raise ConsistencyError("normal-coordinate shear did not make progress")
        last = mw
        F = _shear_map(cur, A.scale(ExactComplex(0, -2)))
        maps.append(F)
        cur = push_forward_weighted(cur, F)
    else:
        raise ConsistencyError("normal-coordinate shear did not terminate")
    return StepRecord("normal-coordinates", _compose_all(maps, H),
                      ("no purely holomorphic graph terms",)), cur


# ---------------------------------------------------------------------------
# step 3: Segre-map normalization (prenormal form)
# ---------------------------------------------------------------------------

def _nd_shape(n, key):
    a, b, _ = key
    return (sum(a[: n - 1]), a[n - 1], sum(b[: n - 1]), b[n - 1])


# Kernel-column families.  Their vanishing is produced by the chain choice
# and the kernel alignment of step 1, not by step-3 substitutions.
_KERNEL_SHAPES = {(1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1)}


def _in_reduced_space_nd(n, key):
    kp, k, lp, l = _nd_shape(n, key)
    if kp + k >= 2 and lp + l >= 2:
        return True
    if kp >= 2 and k == 0 and lp == 0 and l == 1:
        return True
    if lp >= 2 and l == 0 and kp == 0 and k == 1:
        return True
    return False


def _non_reduced_keys(phi, n, r):
    model = model_phi(n, r, phi.M, phi.exact, weights=phi.weights)
    diff = phi - model
    out = []
    for key, v in diff.c.items():
        if v.is_zero():
            continue
        if n == 1:
            a, b, _ = key
            if a[0] < 2 or b[0] < 2:
                out.append(key)
        else:
            if _in_reduced_space_nd(n, key):
                continue
            if _nd_shape(n, key) in _KERNEL_SHAPES:
                continue
            out.append(key)
    return out


def _pivot_series_map_2d(H):
    """z* = z lambda(w) making the z^2 zbar coefficient constant one."""
    a = _w_jet(H, _family_w(H.phi, (2,), (1,)))
    if not a.coeff(((0,), 0)) == EC_ONE:
        raise ConsistencyError("pivot coefficient is not one at the origin")
    lam = _cube_split_root(a)
    if lam == lam.one_like():
        return None
    zs, w = _vars(H)
    return MapJet([zs[0] * lam], w)


def _upper_kill_map_2d(H):
    """z* = z(1 + h) with 2h + h^2 = phi removing z^k zbar families,
    k >= 3."""
    upper = _holo_zero(H)
    for (a, b, j), v in H.phi.c.items():
        if b == (1,) and a[0] >= 3:
            upper.c[((a[0] - 2,), j)] = v
    if upper.is_zero():
        return None
    h = jet_pow(upper.one_like() + upper, 1, 2) - upper.one_like()
    zs, w = _vars(H)
    return MapJet([zs[0] * (h.one_like() + h)], w)


def _segre_pass_2d(H):
    maps = []
    cur = H
    for build in (_pivot_series_map_2d, _upper_kill_map_2d):
        F = build(cur)
        if F is not None:
            maps.append(F)
            cur = push_forward_weighted(cur, F)
    return maps, cur


def _hermitian_factor_series(Hmat, m, eps, dmax):
    """T(u) = Id + ... with T(u)^t diag(eps) conj(T(u)) = H(u), by the
    canonical Hermitian-half choice at every degree."""
    T = {0: [[EC_ONE if p == q else EC_ZERO for q in range(m)] for p in range(m)]}
    for d in range(1, dmax + 1):
        R = [[Hmat(p, q, d) for q in range(m)] for p in range(m)]
        for e in range(1, d):
            Te, Tf = T.get(e), T.get(d - e)
            if Te is None or Tf is None:
                continue
            for p in range(m):
                for q in range(m):
                    acc = EC_ZERO
                    for s in range(m):
                        acc = acc + Te[s][p] * ExactComplex(eps[s]) * Tf[s][q].conjugate()
                    R[p][q] = R[p][q] - acc
        Td = [[ExactComplex(eps[p]) * R[q][p] * ExactComplex(QQ(1, 2))
               for q in range(m)] for p in range(m)]
        if any(not Td[p][q].is_zero() for p in range(m) for q in range(m)):
            T[d] = Td
    return T


def _matrix_series_map(H, C):
    """The map fixing z_n and w and acting on the transverse block by the
    matrix series C(w)."""
    n = H.n
    m = n - 1
    zs, w = _vars(H)
    fs = []
    for p in range(m):
        acc = _holo_zero(H)
        for q in range(m):
            col = {d: mat[p][q] for d, mat in C.items() if not mat[p][q].is_zero()}
            if col:
                acc = acc + _w_jet(H, col) * zs[q]
        fs.append(acc)
    fs.append(zs[n - 1])
    return MapJet(fs, w)


def _pivot_series_map_nd(H, r):
    """Make the transverse Hermitian block and the pivot coefficient
    independent of u."""
    n, m = H.n, H.n - 1
    eps = signature_eps(n, r)
    phi = H.phi
    Hser = [[{} for _ in range(m)] for _ in range(m)]
    for (a, b, j), v in phi.c.items():
        if sum(a) == 1 and sum(b) == 1 and a[n - 1] == 0 and b[n - 1] == 0:
            Hser[a.index(1)][b.index(1)][j] = v
    for p in range(m):
        if not Hser[p][p].get(0, EC_ZERO) == ExactComplex(eps[p]):
            raise ConsistencyError("transverse form is not in signature form")
    dmax = H.M // phi.wu
    T = _hermitian_factor_series(
        lambda p, q, d: Hser[p][q].get(d, EC_ZERO), m, eps, dmax)
    a = [0] * n
    a[n - 1] = 2
    b = [0] * n
    b[n - 1] = 1
    c = _cube_split_root(_w_jet(H, _family_w(phi, tuple(a), tuple(b))))
    if len(T) == 1 and c == c.one_like():
        return None
    zs, w = _vars(H)
    F = _matrix_series_map(H, T)
    fs = list(F.fs)
    fs[n - 1] = c * zs[n - 1]
    return MapJet(fs, w)


def _b_step_map_nd(H, r):
    """Remove families linear in the transverse antiholomorphic block."""
    n, m = H.n, H.n - 1
    eps = signature_eps(n, r)
    Bs = [_holo_zero(H) for _ in range(m)]
    found = False
    for (a, b, j), v in H.phi.c.items():
        if sum(b[:m]) == 1 and b[n - 1] == 0 and sum(a) >= 2:
            q = b[:m].index(1)
            Bs[q].c[(a, j)] = Bs[q].coeff((a, j)) + v * ExactComplex(eps[q])
            found = True
    if not found:
        return None
    zs, w = _vars(H)
    fs = [zs[q] + Bs[q] for q in range(m)] + [zs[n - 1]]
    return MapJet(fs, w)


def _phi_step_map_nd(H):
    """Remove families z^alpha z_n zbar_n (|alpha| >= 1) by shifting the
    degenerate direction by half their generating series."""
    n, m = H.n, H.n - 1
    gen = _holo_zero(H)
    for (a, b, j), v in H.phi.c.items():
        if b[n - 1] == 1 and sum(b[:m]) == 0 and a[n - 1] == 1 and sum(a[:m]) >= 1:
            ar = list(a)
            ar[n - 1] = 0
            gen.c[(tuple(ar), j)] = v * ExactComplex(QQ(1, 2))
    if gen.is_zero():
        return None
    zs, w = _vars(H)
    fs = list(zs)
    fs[n - 1] = zs[n - 1] + gen
    return MapJet(fs, w)


def _psi_step_map_nd(H):
    """Remove families z^alpha z_n^l zbar_n, l >= 2, beyond the model, by
    a multiplicative correction 2 psi + psi^2 = rhs of the degenerate
    direction."""
    n, m = H.n, H.n - 1
    rhs = _holo_zero(H)
    for (a, b, j), v in H.phi.c.items():
        if b[n - 1] == 1 and sum(b[:m]) == 0 and a[n - 1] >= 2:
            if sum(a[:m]) == 0 and a[n - 1] == 2:
                continue  # the pivot family, handled by the pivot series
            ar = list(a)
            ar[n - 1] -= 2
            key = (tuple(ar), j)
            rhs.c[key] = rhs.coeff(key) + v
    if rhs.is_zero():
        return None
    psi = jet_pow(rhs.one_like() + rhs, 1, 2) - rhs.one_like()
    zs, w = _vars(H)
    fs = list(zs)
    fs[n - 1] = zs[n - 1] * (psi.one_like() + psi)
    return MapJet(fs, w)


def _segre_pass_nd(H, r):
    maps = []
    cur = H
    for build in (lambda s: _pivot_series_map_nd(s, r),
                  lambda s: _b_step_map_nd(s, r),
                  _phi_step_map_nd,
                  _psi_step_map_nd):
        F = build(cur)
        if F is not None:
            maps.append(F)
            cur = push_forward_weighted(cur, F)
    return maps, cur


def normalize_segre_map(H):
    """Bring the surface to the prenormal form: the graph equals the model
    modulo the reduced coefficient space."""
    n = H.n
    maps = []
    cur = H
    bad = _non_reduced_keys(cur.phi, n, cur.r)
    last = None
    ident = _identity(H)
    for _ in range(2 * H.M + 4):
        if not bad:
            break
        state = sorted((k, str(cur.phi.coeff(k))) for k in bad)
        if state == last:
            raise ConsistencyError("Segre-map normalization did not make progress")
        last = state
        rec2, cur = normal_coordinates(cur)
        if not rec2.map == ident:
            maps.append(rec2.map)
        if n == 1:
            ms, cur = _segre_pass_2d(cur)
        else:
            ms, cur = _segre_pass_nd(cur, cur.r)
        maps.extend(ms)
        bad = _non_reduced_keys(cur.phi, n, cur.r)
    else:
        raise ConsistencyError("Segre-map normalization did not terminate")
    return (StepRecord("segre-map", _compose_all(maps, H),
                       ("graph equals the model modulo the reduced space",)),
            cur.copy(level="prenormal"))


# ---------------------------------------------------------------------------
# step 4: orthonormal frame along the chain (n > 1)
# ---------------------------------------------------------------------------

def solve_frame_ode(Mser, m, eps, dmax):
    """C(u) = Id + sum_d C_d u^d with (i C')^t diag(eps) conj(C) = M(u) for
    a Hermitian coefficient series M(p, q, d); returns {d: C_d}.

    The solution is automatically pseudo-unitary: C(u)* diag(eps) C(u) =
    diag(eps) exactly through the truncation."""
    C = {0: [[EC_ONE if p == q else EC_ZERO for q in range(m)] for p in range(m)]}
    for d in range(1, dmax + 1):
        R = [[Mser(p, q, d - 1) for q in range(m)] for p in range(m)]
        for e in range(1, d):
            Ce, Cf = C.get(e), C.get(d - e)
            if Ce is None or Cf is None:
                continue
            fac = EC_I * ExactComplex(e)
            for p in range(m):
                for q in range(m):
                    acc = EC_ZERO
                    for s in range(m):
                        acc = acc + Ce[s][p] * ExactComplex(eps[s]) * Cf[s][q].conjugate()
                    R[p][q] = R[p][q] - acc * fac
        inv = (EC_I * ExactComplex(d)).inverse()
        Cd = [[inv * R[q][p] * ExactComplex(eps[p]) for q in range(m)] for p in range(m)]
        if any(not Cd[p][q].is_zero() for p in range(m) for q in range(m)):
            C[d] = Cd
    return C


def frame_unitarity_defect(C, m, eps, dmax):
    """C(u)* diag(eps) C(u) - diag(eps) per u-degree; empty means exact
    pseudo-unitarity."""
    out = {}
    for d in range(dmax + 1):
        acc = [[EC_ZERO] * m for _ in range(m)]
        for e, Ce in C.items():
            Cf = C.get(d - e)
            if d - e < 0 or Cf is None:
                continue
            for p in range(m):
                for q in range(m):
                    s_ = EC_ZERO
                    for s in range(m):
                        s_ = s_ + Ce[s][p].conjugate() * ExactComplex(eps[s]) * Cf[s][q]
                    acc[p][q] = acc[p][q] + s_
        if d == 0:
            for p in range(m):
                acc[p][p] = acc[p][p] - ExactComplex(eps[p])
        if any(not acc[p][q].is_zero() for p in range(m) for q in range(m)):
            out[d] = acc
    return out


def _frame_block(phi, n):
    """Coefficient matrices of the z_p z_n^2 zbar_q zbar_n family."""
    m = n - 1
    out = [[{} for _ in range(m)] for _ in range(m)]
    for (a, b, j), v in phi.c.items():
        if a[n - 1] == 2 and sum(a[:m]) == 1 and b[n - 1] == 1 and sum(b[:m]) == 1:
            out[a[:m].index(1)][b[:m].index(1)][j] = v
    return out


def orthonormal_frame_ode(H):
    """Remove the Hermitian part of the transverse frame family by an
    analytic pseudo-unitary change of frame along the chain."""
    n = H.n
    if n == 1:
        raise DomainError("the frame step applies in dimensions above one")
    m = n - 1
    eps = signature_eps(n, H.r)
    dmax = H.M // H.phi.wu
    maps = []
    cur = H
    last = None
    for _ in range(H.M + 2):
        B = _frame_block(cur.phi, n)

        def Mser(p, q, d, _B=B):
            bpq = _B[p][q].get(d, EC_ZERO)
            bqp = _B[q][p].get(d, EC_ZERO)
            return (bpq + bqp.conjugate()) * ExactComplex(QQ(1, 4))

        support = [d for p in range(m) for q in range(m) for d in range(dmax + 1)
                   if not Mser(p, q, d).is_zero()]
        if not support:
            break
        lowest = min(support)
        if last is not None and lowest <= last:
            raise ConsistencyError("frame step did not make progress")
        last = lowest
        C = solve_frame_ode(Mser, m, eps, dmax)
        if frame_unitarity_defect(C, m, eps, dmax):
            raise ConsistencyError("frame solution is not pseudo-unitary")
        F = _matrix_series_map(cur, C)
        maps.append(F)
        cur = push_forward_weighted(cur, F)
        if _non_reduced_keys(cur.phi, n, cur.r):
            rec3, cur = normalize_segre_map(cur)
            maps.append(rec3.map)
    else:
        raise ConsistencyError("frame step did not terminate")
    return (StepRecord("orthonormal-frame", _compose_all(maps, H),
                       ("transverse frame family has no Hermitian part",
                        "frame is pseudo-unitary exactly")),
            cur)


# ---------------------------------------------------------------------------
# step 5: gauge reparametrization of the chain
# ---------------------------------------------------------------------------

def _gauge_source(H):
    """The real u-series whose vanishing the gauge step enforces."""
    n = H.n
    if n == 1:
        return {j: ExactComplex(v.im)
                for j, v in _family_w(H.phi, (4,), (2,)).items()}
    eps = signature_eps(n, H.r)
    B = _frame_block(H.phi, n)
    out = {}
    for p in range(n - 1):
        for j, v in B[p][p].items():
            out[j] = out.get(j, EC_ZERO) + ExactComplex(v.im * eps[p])
    return out


def gauge_parametrization(H, qprime0=QQ(1)):
    """Reparametrize the chain so the remaining imaginary trace family
    vanishes; the gauge q(w) has q(0) = 0 and q'(0) = qprime0."""
    n = H.n
    qprime0 = QQ(qprime0)
    if n == 1:
        if qprime0 == 0:
            raise DomainError("the gauge derivative at the origin must not vanish")
    elif qprime0 <= 0:
        raise DomainError("the gauge derivative at the origin must be positive")
    scale3 = QQ(3) if n == 1 else QQ(3, n - 1)
    maps = []
    cur = H
    last = None
    zs, w = _vars(H)
    for _ in range(H.M + 2):
        src = {j: v for j, v in _gauge_source(cur).items() if not v.is_zero()}
        if not src:
            break
        lowest = min(src)
        if last is not None and lowest <= last:
            raise ConsistencyError("gauge step did not make progress")
        last = lowest
        for v in src.values():
            if not v.is_real():
                raise ConsistencyError("gauge source series is not real")
        expo = _antider_w(_w_jet(cur, src)).scale(ExactComplex(scale3))
        q = _antider_w(jet_exp(expo))  # q' = exp(expo), q(0) = 0
        if n == 1:
            fs = [zs[0] * jet_exp(expo.scale(ExactComplex(QQ(1, 3))))]
        else:
            half = jet_exp(expo.scale(ExactComplex(QQ(1, 2))))
            third = jet_exp(expo.scale(ExactComplex(QQ(1, 3))))
            fs = [zs[i] * half for i in range(n - 1)] + [zs[n - 1] * third]
        F = MapJet(fs, q)
        maps.append(F)
        cur = push_forward_weighted(cur, F)
    else:
        raise ConsistencyError("gauge step did not terminate")
    total = _compose_all(maps, H)
    if qprime0 != 1:
        root = rational_root(qprime0, 3 if n == 1 else 6)
        if root is None:
            raise ModeError("gauge scaling is not an exact rational dilation")
        frame = ModelFrame(n, H.r, root)
        cur = push_forward_frame(cur, frame)
        total = frame.to_map(H.M, H.exact).compose(total)
    return (StepRecord("gauge", total, ("imaginary trace family vanishes",)),
            cur.copy(level="normal"), total.g)


# ---------------------------------------------------------------------------
# chain determination and the straightening step
# ---------------------------------------------------------------------------

def _key_degree(key):
    for part in reversed(key):
        if isinstance(part, int):
            return part
    return 0


def _chain_residual_2d(phi):
    out = {}
    for j, v in _family_w(phi, (3,), (2,)).items():
        if v.re != 0:
            out[("pivot-upper-re", j)] = v.re
    return out


def _chain_residual_nd(phi, n, eps):
    m = n - 1
    out = {}
    tr = {}
    for (a, b, j), v in phi.c.items():
        ak, bk = sum(a[:m]), sum(b[:m])
        if ak == 1 and a[n - 1] == 1 and bk == 0 and b[n - 1] == 2:
            p = a[:m].index(1)
            if v.re != 0:
                out[("kernel-quadratic", p, j, "re")] = v.re
            if v.im != 0:
                out[("kernel-quadratic", p, j, "im")] = v.im
        elif ak == 1 and a[n - 1] == 1 and bk == 1 and b[n - 1] == 1:
            p = a[:m].index(1)
            if p == b[:m].index(1):
                tr[j] = tr.get(j, EC_ZERO) + v * ExactComplex(eps[p])
    for j, v in tr.items():
        if not v.is_zero():
            if not v.is_real():
                raise ConsistencyError("Levi-trace family is not real")
            out[("levi-trace", j)] = v.re
    return out


def _run_2d(H_flat, ycoeffs):
    """Chain shift and steps 2-3 from a flat surface; returns the extra
    step-1 map, the step-1 surface, the later step records, the prenormal
    surface and the chain residual."""
    S = _chain_shift_2d(H_flat, ycoeffs)
    H1 = _push_if(H_flat, S)
    kmaps, H1 = _tangent_kill(H1, flat_plane=True)
    step1_extra = _compose_all(kmaps, H_flat).compose(S)
    rec2, H2 = normal_coordinates(H1)
    rec3, H3 = normalize_segre_map(H2)
    return step1_extra, H1, rec2, rec3, H3, _chain_residual_2d(H3.phi)


def _run_nd(H_simpl, zcoeffs, eps):
    """Curve shift, tangent and kernel alignment, then steps 2-4; returns
    the step-1 map and surface, the later step records, the prenormal
    surface and the chain residual."""
    S = _curve_shift_nd(H_simpl, zcoeffs)
    H1 = _push_if(H_simpl, S)
    kmaps, H1 = _tangent_kill(H1, flat_plane=False)
    A, H1, rres = _kernel_align_nd(H1)
    kmaps2, H1 = _tangent_kill(H1, flat_plane=False)
    step1 = _compose_all(kmaps2, H_simpl).compose(A).compose(
        _compose_all(kmaps, H_simpl)).compose(S)
    rec2, H2 = normal_coordinates(H1)
    rec3, H3 = normalize_segre_map(H2)
    rec4, H4 = orthonormal_frame_ode(H3)
    res = _chain_residual_nd(H4.phi, H_simpl.n, eps)
    # Membership coefficients of degree d are determined by graph families
    # of weight 4 + wu*d; beyond the truncation they are not invariants.
    dmax_r = (H_simpl.M - 4) // H_simpl.phi.wu
    for d, v in rres.items():
        if d > dmax_r:
            continue
        if not v.is_real():
            raise ConsistencyError("degeneracy-membership residual is not real")
        res[("degeneracy-membership", d)] = v.re
    return step1, H1, rec2, rec3, rec4, H4, res


def _determine_chain_2d(H_flat):
    M = H_flat.M
    dmax = 0
    d = 1
    while 5 + 3 * (d - 1) <= M:
        dmax = d
        d += 1
    y = {}
    run = _run_2d(H_flat, y)
    for d in range(1, dmax + 1):
        key = ("pivot-upper-re", d - 1)
        c = run[5].get(key, QQ(0))
        if c == 0:
            continue
        probe = dict(y)
        probe[d] = probe.get(d, QQ(0)) + 1
        slope = _run_2d(H_flat, probe)[5].get(key, QQ(0)) - c
        if slope == 0:
            raise GenericityError("chain condition is degenerate at degree %d" % d)
        y[d] = y.get(d, QQ(0)) - c / slope
        run = _run_2d(H_flat, y)
    if run[5]:
        raise ConsistencyError("chain determination left a residual: %r" % (run[5],))
    return y, run


def _determine_chain_nd(H_simpl, eps):
    n = H_simpl.n
    dmax = max(1, H_simpl.M // H_simpl.phi.wu)
    z = [dict() for _ in range(n)]
    run = _run_nd(H_simpl, z, eps)
    for d in range(1, dmax + 1):
        dirs = []
        for comp in range(n):
            dirs.append((comp, EC_ONE))
            dirs.append((comp, EC_I))
        base = run[6]
        cols = []
        colvals = []
        for comp, unit in dirs:
            zc = [dict(c) for c in z]
            zc[comp][d] = zc[comp].get(d, EC_ZERO) + unit
            rp = _run_nd(H_simpl, zc, eps)[6]
            keys = set(base) | set(rp)
            diff = {k: rp.get(k, QQ(0)) - base.get(k, QQ(0)) for k in keys}
            diff = {k: v for k, v in diff.items() if v != 0}
            if diff:
                cols.append((comp, unit))
                colvals.append(diff)
        if not cols:
            continue
        rowkeys = sorted({k for diff in colvals for k in diff},
                         key=lambda k: (_key_degree(k), str(k)))
        rowkeys = rowkeys[: len(cols)]
        mat = [[ExactComplex(colvals[j].get(rk, QQ(0))) for j in range(len(cols))]
               for rk in rowkeys]
        rhs = [ExactComplex(-base.get(rk, QQ(0))) for rk in rowkeys]
        try:
            sol = ExactLU(mat).solve(rhs)
        except ConsistencyError:
            raise GenericityError("chain conditions are degenerate at degree %d" % d)
        changed = False
        for (comp, unit), val in zip(cols, sol):
            if not val.is_zero():
                z[comp][d] = z[comp].get(d, EC_ZERO) + unit * val
                changed = True
        if changed:
            run = _run_nd(H_simpl, z, eps)
    if run[6]:
        raise ConsistencyError("chain determination left a residual: %r" % (run[6],))
    return z, run


def straighten_locus_and_chain(H):
    """Step 1: flatten the Levi-degeneracy data, straighten the degenerate
    chain onto the axis, and align the transverse geometry along it.

    Returns the step record, the straightened surface, the chain curve
    (z-components as jets in w) and the cached later-step run used while
    determining the chain."""
    if H.n == 1:
        theta, H_flat = _flatten_2d(H)
        y, run = _determine_chain_2d(H_flat)
        step1_extra, H1 = run[0], run[1]
        total = step1_extra.compose(theta)
        _step1_2d_asserts(H1)
        chain = (_w_jet(H_flat, {d: ExactComplex(0, v) for d, v in y.items()}),)
        return (StepRecord("straighten", total,
                           ("degeneracy set flat",
                            "chain on the axis",
                            "graph, tangent and Levi-trace terms vanish on the chain")),
                H1, chain, run)
    eps = signature_eps(H.n, H.r)
    z, run = _determine_chain_nd(H, eps)
    step1, H1 = run[0], run[1]
    zv = (0,) * H.n
    _assert_family_zero(H1.phi, lambda k: k[0] == zv and k[1] == zv, "pure-u")
    _assert_family_zero(
        H1.phi, lambda k: (k[0] == zv or k[1] == zv) and sum(k[0]) + sum(k[1]) == 1,
        "tangent")
    chain = tuple(_w_jet(H, dict(comp)) for comp in z)
    return (StepRecord("straighten", step1,
                       ("chain on the axis",
                        "complex tangents horizontal along the chain",
                        "Levi kernels aligned along the chain")),
            H1, chain, run)


# ---------------------------------------------------------------------------
# the full pipeline
# ---------------------------------------------------------------------------

def _canonical_map(H, total):
    """Drop map components above the weight range determined by the
    truncated surface: they enter the graph only beyond the truncation, so
    the push forward through weight M is unchanged and the representative
    becomes unique."""
    n = H.n
    M = H.M
    if n == 1:
        fmax = [M - 2]
    else:
        fmax = [M - 3] * (n - 1) + [M - 4]
    fs = []
    for i, f in enumerate(total.fs):
        out = f._like({})
        for key, v in f.c.items():
            if f.key_weight(key) <= fmax[i]:
                out.c[key] = v
        # always keep the identity part
        a = [0] * n
        a[i] = 1
        idk = (tuple(a), 0)
        if idk in f.c:
            out.c[idk] = f.c[idk]
        fs.append(out)
    return MapJet(fs, total.g)


def convergent_normalize(H, qprime0=QQ(1)):
    """Run the full geometric normalization; a raw surface is adapted
    first.  Returns the composed map, the normal form and a step report
    certified against the composition."""
    pre_steps = []
    if H.phi.weights == unit_weights(H.n) or not H.is_simplified():
        H, adapt_map, _ = adapt_preliminary(H)
        pre_steps.append(StepRecord("adapt", adapt_map, ("simplified form",)))
    rec1, H1, chain, run = straighten_locus_and_chain(H)
    if H.n == 1:
        _, _, rec2, rec3, H_pre, _ = run
        recs = [rec1, rec2, rec3]
    else:
        _, _, rec2, rec3, rec4, H_pre, _ = run
        recs = [rec1, rec2, rec3, rec4]
    rec5, H_norm, qfun = gauge_parametrization(H_pre, qprime0)
    recs.append(rec5)
    model = model_phi(H.n, H.r, H.M, H.exact, weights=H.phi.weights)
    _, comp = project_normal_space(H_norm.phi - model, H.n, H.r)
    if not comp.is_zero():
        raise ConsistencyError("pipeline output is outside the normal space")
    total = _canonical_map(H, _compose_all([r.map for r in recs], H))
    check = push_forward_weighted(H, total)
    if not check.phi == H_norm.phi:
        raise ConsistencyError("composed map disagrees with the step outputs")
    report = PipelineReport(steps=pre_steps + recs, chain_curve=chain,
                            gauge_function=qfun, prenormal=H_pre,
                            total_map=total)
    return ConvergentNormalization(map=total, surface=H_norm, report=report)
