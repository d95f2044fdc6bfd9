"""The linearized normalization step on the model surface.

For an infinitesimal map increment (f, g) the model-tangency linearization is

    n = 1:  L(f, g) = Re( i g + (2 z zbar + zbar^2) f ) |_{w = u + i P}
    n > 1:  L(f, g) = Re( i g + <fv, zvbar> + (2 z_n zbar_n + zbar_n^2) f_n )
                       |_{w = u + i P}

with P the model graph function and <.,.> the signature pairing on the
nondegenerate directions.  Weight by weight, twice this operator maps the
admissible increment space isomorphically onto a complement of the normal
space N, so every residual splits uniquely as 2 L(f, g) + (term in N).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DomainError, StructuralError
from .linalg import ExactLU
from .maps import MapJet, ModelFrame, rho_admissible, signature_eps
from .scalars import EC_I, EC_ONE, ExactComplex, QQ, units_for
from .series import (
    HoloJet,
    RealJet,
    holo_monomials_of_weight,
    real_monomials_of_weight,
    subst_real,
    surface_weights,
)
from .hypersurface import HypersurfaceJet, model_phi


# ---------------------------------------------------------------------------
# the linearized operator
# ---------------------------------------------------------------------------

def _cm_multipliers(n, r, M, exact=True):
    """Real-jet factors multiplying each holomorphic component on the graph:
    the gradient of the model in the z-directions (f-components) and the
    constant i (g-component)."""
    weights = surface_weights(n)
    eps = signature_eps(n, r) if n > 1 else []
    one, iu, half = units_for(exact)
    mults = []
    if n == 1:
        z = RealJet.var_z(1, weights, M, 0, exact)
        zb = RealJet.var_zbar(1, weights, M, 0, exact)
        mults.append(z * zb.scale(one + one) + zb * zb)
    else:
        for j in range(n - 1):
            zb = RealJet.var_zbar(n, weights, M, j, exact)
            mults.append(zb.scale(one * eps[j]))
        zn = RealJet.var_z(n, weights, M, n - 1, exact)
        znb = RealJet.var_zbar(n, weights, M, n - 1, exact)
        mults.append(zn * znb.scale(one + one) + znb * znb)
    return mults


def cm_operator(comps, n, r):
    """L(f, g) for holomorphic components comps = [f_1..f_n, g] on the
    anisotropic grid.  Returns a real jet."""
    if len(comps) != n + 1:
        raise StructuralError("expected n map components and one g component")
    M = min(c.M for c in comps)
    exact = comps[0].exact
    P = model_phi(n, r, M, exact)
    mults = _cm_multipliers(n, r, M, exact)
    acc = RealJet.zero(n, surface_weights(n), M, exact)
    for i in range(n):
        acc = acc + comps[i].restrict_to_graph(P) * mults[i]
    _, iu, _ = units_for(exact)
    acc = acc + comps[n].restrict_to_graph(P).scale(iu)
    return acc.re_part()


# ---------------------------------------------------------------------------
# the normal space
# ---------------------------------------------------------------------------

def project_normal_space(psi, n, r):
    """Split a real jet on the anisotropic grid as psi = nPart + comp where
    nPart lies in the normal space N and comp in its coordinate complement."""
    if psi.n != n:
        raise StructuralError("jet dimension mismatch")
    npart = psi._like({})
    comp = psi._like({})
    exact = psi.exact
    one, iu, half = units_for(exact)
    if n == 1:
        seen = set()
        for (a, b, j), v in psi.c.items():
            aa, bb = a[0], b[0]
            if aa < 2 or bb < 2:
                comp.c[(a, b, j)] = v
            elif (aa, bb) in ((3, 2), (2, 3)) or (aa, bb) in ((4, 2), (2, 4)):
                hi, lo = max(aa, bb), min(aa, bb)
                if (hi, lo, j) in seen:
                    continue
                seen.add((hi, lo, j))
                chigh = psi.coeff(((hi,), (lo,), j))
                clow = psi.coeff(((lo,), (hi,), j))
                if hi == 3:
                    # only the real part of the (3,2) coefficient is normalized
                    part = (chigh + clow) * half
                else:
                    # only the imaginary part of the (4,2) coefficient
                    part = (chigh - clow) * half
                if not _is_zero(part):
                    comp.c[((hi,), (lo,), j)] = part
                    comp.c[((lo,), (hi,), j)] = part.conjugate()
                rest = chigh - part
                restc = clow - part.conjugate()
                if not _is_zero(rest):
                    npart.c[((hi,), (lo,), j)] = rest
                if not _is_zero(restc):
                    npart.c[((lo,), (hi,), j)] = restc
            else:
                npart.c[(a, b, j)] = v
        return npart, comp

    eps = signature_eps(n, r)
    seen_tr = set()
    seen_b = set()
    for (a, b, j), v in psi.c.items():
        av, k = a[: n - 1], a[n - 1]
        bv, l = b[: n - 1], b[n - 1]
        kp, lp = sum(av), sum(bv)
        shape_ok = (
            (kp + k >= 2 and lp + l >= 2)
            or (kp >= 2 and k == 0 and lp == 0 and l == 1)
            or (lp >= 2 and l == 0 and kp == 0 and k == 1)
        )
        if not shape_ok:
            comp.c[(a, b, j)] = v
            continue
        fam = (kp, k, lp, l)
        if fam in ((1, 1, 0, 2), (0, 2, 1, 1)):
            comp.c[(a, b, j)] = v
            continue
        if fam == (1, 1, 1, 1):
            if j in seen_tr:
                continue
            seen_tr.add(j)
            _split_trace_family(psi, npart, comp, n, eps, j, half)
            continue
        if fam in ((1, 2, 1, 1), (1, 1, 1, 2)):
            if j in seen_b:
                continue
            seen_b.add(j)
            _split_b_family(psi, npart, comp, n, eps, j, half, iu)
            continue
        npart.c[(a, b, j)] = v
    return npart, comp


def _nd_key(n, p, k, q, l, j):
    a = [0] * n
    b = [0] * n
    if p is not None:
        a[p] += 1
    a[n - 1] += k
    if q is not None:
        b[q] += 1
    b[n - 1] += l
    return (tuple(a), tuple(b), j)


def _split_trace_family(psi, npart, comp, n, eps, j, half):
    """Monomials zv_p z_n zvbar_q zbar_n u^j: the signature trace of the
    coefficient matrix is normalized; the trace-free part stays in N."""
    m = n - 1
    H = [[psi.coeff(_nd_key(n, p, 1, q, 1, j)) for q in range(m)] for p in range(m)]
    tr = ExactComplex(0) if psi.exact else 0j
    for p in range(m):
        tr = tr + H[p][p] * eps[p]
    scale = QQ(1, m) if psi.exact else 1.0 / m
    for p in range(m):
        for q in range(m):
            cpart = (tr * scale * eps[p]) if p == q else (tr - tr)
            rest = H[p][q] - cpart
            key = _nd_key(n, p, 1, q, 1, j)
            if not _is_zero(cpart):
                comp.c[key] = cpart
            if not _is_zero(rest):
                npart.c[key] = rest


def _split_b_family(psi, npart, comp, n, eps, j, half, iu):
    """Monomials zv_p z_n^2 zvbar_q zbar_n u^j (and conjugates): the
    Hermitian part and the signature trace of the skew part are normalized;
    the trace-free skew part stays in N."""
    m = n - 1
    B = [[psi.coeff(_nd_key(n, p, 2, q, 1, j)) for q in range(m)] for p in range(m)]
    herm = [[(B[p][q] + B[q][p].conjugate()) * half for q in range(m)] for p in range(m)]
    skew = [[(B[p][q] - B[q][p].conjugate()) * half for q in range(m)] for p in range(m)]
    # skew = i K with K Hermitian; normalize the signature trace of K
    trk = ExactComplex(0) if psi.exact else 0j
    for p in range(m):
        trk = trk + skew[p][p] * eps[p]
    scale = QQ(1, m) if psi.exact else 1.0 / m
    for p in range(m):
        for q in range(m):
            cpart = herm[p][q]
            if p == q:
                cpart = cpart + trk * scale * eps[p]
            rest = B[p][q] - cpart
            key = _nd_key(n, p, 2, q, 1, j)
            ckey = _nd_key(n, p, 1, q, 2, j)
            if not _is_zero(cpart):
                comp.c[key] = cpart
                comp.c[ckey] = cpart.conjugate()
            if not _is_zero(rest):
                npart.c[key] = rest
                npart.c[ckey] = rest.conjugate()


def _is_zero(v):
    return v.is_zero() if isinstance(v, ExactComplex) else v == 0


def in_normal_space(psi, n, r):
    _, comp = project_normal_space(psi, n, r)
    return comp.is_zero()


# ---------------------------------------------------------------------------
# per-weight dense solve
# ---------------------------------------------------------------------------

_SYSTEM_CACHE = {}


def _min_solver_weight(n):
    return 4 if n == 1 else 7


def _basis_descriptors(n, m):
    """Ordered column descriptors (slot, key) at weight m; slot 0..n-1 are
    map components, slot n is g.  Each descriptor carries two real columns
    (coefficient 1 and coefficient i)."""
    weights = surface_weights(n)
    wz, wu = weights
    out = []
    for slot in range(n):
        wtarget = m - (wu - wz[slot])
        if wtarget < wz[slot] + 1:
            continue
        for key in holo_monomials_of_weight(n, weights, wtarget):
            out.append((slot, key))
    if m > wu:
        for key in holo_monomials_of_weight(n, weights, m):
            out.append((n, key))
    return out


def _row_index(n, m):
    """Real coordinates at weight m: (canonical key, part) with part 0 the
    real and part 1 the imaginary coordinate."""
    weights = surface_weights(n)
    rows = []
    for (a, b, j) in real_monomials_of_weight(n, weights, m):
        if (b, a) < (a, b):
            continue
        rows.append(((a, b, j), 0))
        if a != b:
            rows.append(((a, b, j), 1))
    return rows


def _coords(jet, rows, exact):
    half = QQ(1, 2) if exact else 0.5
    out = []
    for (key, part) in rows:
        v = jet.coeff(key)
        if exact:
            out.append(ExactComplex(v.re) if part == 0 else ExactComplex(v.im))
        else:
            out.append(v.real if part == 0 else v.imag)
    return out


def _build_system(n, r, m):
    weights = surface_weights(n)
    cols = _basis_descriptors(n, m)
    rows = _row_index(n, m)
    P = model_phi(n, r, m, True)
    mults = _cm_multipliers(n, r, m, True)
    _, iu, _ = units_for(True)
    A = []
    colmeta = []
    for (slot, key) in cols:
        mono = HoloJet.monomial(n, weights, m, key[0], key[1], 1, True)
        graph = mono.restrict_to_graph(P)
        if slot < n:
            pre = graph * mults[slot]
        else:
            pre = graph.scale(iu)
        # columns of 2 L: coefficient 1 -> 2 Re(pre); coefficient i -> -2 Im(pre)
        one_col = pre.re_part().weighted_component(m).scale(ExactComplex(2))
        i_col = pre.im_part().weighted_component(m).scale(ExactComplex(-2))
        for cjet, tag in ((one_col, 0), (i_col, 1)):
            _, comp = project_normal_space(cjet, n, r)
            A.append(_coords(comp, rows, True))
            colmeta.append((slot, key, tag))
    # transpose: rows x cols
    mat = [[A[c][rr] for c in range(len(A))] for rr in range(len(rows))]
    lu = ExactLU(mat)
    npmat = np.array(
        [[float(x.re) for x in row] for row in mat], dtype=float
    )
    return {"rows": rows, "cols": colmeta, "lu": lu, "np": npmat}


def _system(n, r, m):
    key = (n, r, m)
    if key not in _SYSTEM_CACHE:
        _SYSTEM_CACHE[key] = _build_system(n, r, m)
    return _SYSTEM_CACHE[key]


@dataclass
class HomologicalSolution:
    comps: list  # n+1 holomorphic jets (f_1..f_n, g)
    npart: object  # residual term in the normal space
    weights_used: list = field(default_factory=list)


def solve_homological(psi, n, r):
    """Unique (f, g, nPart) with psi = 2 L(f, g) + nPart, nPart in N, and
    (f, g) supported in the admissible increment weights.  psi must be a
    real jet supported in weights > [u] on the anisotropic grid."""
    weights = surface_weights(n)
    exact = psi.exact
    M = psi.M
    if psi.n != n:
        raise StructuralError("jet dimension mismatch")
    lo = psi.min_weight()
    if lo is not None and lo < _min_solver_weight(n):
        raise DomainError(
            "homological data must start above the model weight (got weight %d)"
            % lo
        )
    comps = [HoloJet.zero(n, weights, M, exact) for _ in range(n + 1)]
    used = []
    for m in sorted(psi.support_weights()):
        sysd = _system(n, r, m)
        rhs_full = psi.weighted_component(m)
        npart_m, comp_m = project_normal_space(rhs_full, n, r)
        b = _coords(comp_m, sysd["rows"], exact)
        if exact:
            x = sysd["lu"].solve(b)
            for v in x:
                if not v.is_real():
                    raise ConsistencyError("homological solve produced a non-real coordinate")
            xs = [v.re for v in x]
        else:
            sol, *_ = np.linalg.lstsq(sysd["np"], np.array(b, dtype=float), rcond=None)
            xs = list(sol)
        for (slot, key, tag), coef in zip(sysd["cols"], xs):
            if exact:
                val = ExactComplex(coef) if tag == 0 else ExactComplex(0, coef)
                if val.is_zero():
                    continue
            else:
                val = complex(coef) if tag == 0 else complex(0, coef)
                if val == 0:
                    continue
            comps[slot].c[key] = comps[slot].coeff(key) + val
        used.append(m)
    comps = [c._like({k: v for k, v in c.c.items() if not _is_zero(v)}) for c in comps]
    L = cm_operator(comps, n, r)
    npart = psi - _times2(L, exact)
    # keep only the weights present in psi: higher-weight tails of L belong
    # to later steps of the driver, not to this split
    npart = npart._like(
        {k: v for k, v in npart.c.items() if npart.key_weight(k) in set(used)}
    )
    if exact:
        bad = project_normal_space(npart, n, r)[1]
        if not bad.is_zero():
            raise ConsistencyError("homological residual left the normal space")
    return HomologicalSolution(comps=comps, npart=npart, weights_used=used)


def _times2(jet, exact):
    return jet.scale(ExactComplex(2) if exact else 2.0)


# ---------------------------------------------------------------------------
# the formal normalization driver
# ---------------------------------------------------------------------------

@dataclass
class FormalNormalization:
    map: MapJet
    surface: HypersurfaceJet  # Phi* = P + normal-space tail
    residual_certified: bool = False


def tangency_residual(H, F, phi_star):
    """Im g - phi_star(f, fbar, Re g) restricted to the graph of H."""
    Zs = [f.restrict_to_graph(H.phi) for f in F.fs]
    W = F.g.restrict_to_graph(H.phi)
    U, V = W.re_part(), W.im_part()
    return V - subst_real(phi_star, Zs, [Z.conjugate() for Z in Zs], U)


def formal_normalize(H, order=None):
    """Normalize a simplified surface by the unique normalized-class map.

    Weight by weight the tangency residual is split through the homological
    solve; map increments are (f += a, g += 2 b) and the normal-space part
    accumulates into the normal form.  Returns the map and the normal form,
    both certified by an exact zero residual (in exact mode).
    """
    n = H.n
    r = H.r
    if r is None:
        raise StructuralError("surface signature r is required for normalization")
    weights = surface_weights(n)
    wu = weights[1]
    M = H.M if order is None else min(order, H.M)
    exact = H.exact
    if exact and not H.is_simplified():
        raise DomainError("formal normalization expects a simplified surface")
    phi = H.phi.truncate(M)
    Hc = HypersurfaceJet(phi, r=r, level=H.level)
    F = MapJet.identity(n, weights, M, exact)
    phi_star = model_phi(n, r, M, exact)
    for m in range(wu + 1, M + 1):
        E = tangency_residual(Hc, F, phi_star)
        lowE = E.weight_range(0, m - 1)
        if exact and not lowE.is_zero():
            raise ConsistencyError(
                "tangency residual regressed below weight %d" % m
            )
        Rm = E.weighted_component(m)
        if Rm.is_zero():
            continue
        sol = solve_homological(Rm, n, r)
        fs = [F.fs[i] + sol.comps[i] for i in range(n)]
        g = F.g + _times2(sol.comps[n], exact)
        F = MapJet(fs, g)
        phi_star = phi_star + sol.npart
    E = tangency_residual(Hc, F, phi_star)
    certified = E.is_zero() if exact else _max_abs(E) < 1e-8
    if exact and not certified:
        raise ConsistencyError("normalization did not annihilate the residual")
    if exact and not F.is_normalized_class():
        raise ConsistencyError("normalizing map left the normalized class")
    tail = phi_star - model_phi(n, r, M, exact)
    if exact and not in_normal_space(tail, n, r):
        raise ConsistencyError("normal form tail left the normal space")
    out = HypersurfaceJet(phi_star, r=r, level="normal")
    return FormalNormalization(map=F, surface=out, residual_certified=certified)


def _max_abs(jet):
    return max((abs(v) for v in jet.c.values()), default=0.0)


# ---------------------------------------------------------------------------
# self-maps of the model
# ---------------------------------------------------------------------------

@dataclass
class AutomorphismReport:
    n: int
    r: int
    kernel_dims: dict
    verified_frames: int
    rho_admissible: bool
    description: str = ""


def model_automorphism_search(n, r, max_weight=None):
    """Certify that every formal self-map of the model in the normalized
    class is the identity (trivial kernel of the linearized operator weight
    by weight), and verify a sample of frame self-maps exactly."""
    from .hypersurface import push_forward_frame

    weights = surface_weights(n)
    wu = weights[1]
    if max_weight is None:
        max_weight = 2 * wu + 2
    dims = {}
    for m in range(wu + 1, max_weight + 1):
        sysd = _system(n, r, m)
        ncols = len(sysd["cols"])
        # full coordinates of 2L (not reduced mod N): rank must equal ncols
        if ncols:
            if sysd["lu"].rank != ncols:
                raise ConsistencyError(
                    "linearized operator dropped rank at weight %d" % m
                )
        dims[m] = 0
    M = max_weight
    model = HypersurfaceJet.model(n, r, M)
    frames = [ModelFrame(1, 0, QQ(2)), ModelFrame(1, 0, QQ(-1)), ModelFrame(1, 0, QQ(1, 3))] if n == 1 else _nd_sample_frames(n, r)
    count = 0
    for fr in frames:
        img = push_forward_frame(model, fr)
        if not (img.phi == model.phi):
            raise ConsistencyError("frame sample failed to preserve the model")
        count += 1
    desc = (
        "all self-maps in the normalized class are trivial; the stability "
        "group is the frame family (dilations%s)"
        % ("" if n == 1 else ", signature-preserving rotations"
           + (", and the orientation swap" if rho_admissible(n, r) else ""))
    )
    return AutomorphismReport(
        n=n,
        r=r,
        kernel_dims=dims,
        verified_frames=count,
        rho_admissible=rho_admissible(n, r),
        description=desc,
    )


def _nd_sample_frames(n, r):
    frames = [ModelFrame(n, r, QQ(2))]
    m = n - 1
    # a rational circle rotation in the first nondegenerate direction
    C = [[EC_ONE if i == j else ExactComplex(0) for j in range(m)] for i in range(m)]
    C[0][0] = ExactComplex(QQ(3, 5), QQ(4, 5))
    frames.append(ModelFrame(n, r, QQ(1), 1, C))
    # a permutation of two same-sign directions, when available
    same = None
    eps = signature_eps(n, r)
    for i in range(m):
        for j in range(i + 1, m):
            if eps[i] == eps[j]:
                same = (i, j)
    if same:
        C = [[EC_ONE if i == j else ExactComplex(0) for j in range(m)] for i in range(m)]
        i, j = same
        C[i][i] = C[j][j] = ExactComplex(0)
        C[i][j] = C[j][i] = EC_ONE
        frames.append(ModelFrame(n, r, QQ(1), 1, C))
    if rho_admissible(n, r):
        # swap the positive and negative blocks
        C = [[ExactComplex(0)] * m for _ in range(m)]
        for i in range(r):
            C[i][r + i] = EC_ONE
            C[r + i][i] = EC_ONE
        frames.append(ModelFrame(n, r, QQ(1), -1, C))
    return frames
