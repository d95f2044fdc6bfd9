"""Floating-point geometric layer for the Levi-degeneracy locus.

A surface is held globally as a polynomial defining function with exact
coefficients; everything local (projection onto the degeneracy set, slope
fields, chain tracing) happens in double precision.  The transverse slope
field is obtained by recentering the polynomial at the base point,
truncating to a jet, normalizing the jet in float mode and pulling the
transverse model direction back through the differential of the
normalizing map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GenericityError, NumericalError, StructuralError
from .homological import formal_normalize
from .hypersurface import HypersurfaceJet, _linear_map, push_forward_linear
from .scalars import ExactComplex, QQ
from .series import HoloJet, RealJet, subst_real, unit_weights

# ---------------------------------------------------------------------------
# polynomial defining functions rho(z, zbar, w, wbar)
#
# keys: (a, b, jw, jwb) with a, b exponent tuples over the z variables and
# jw, jwb the powers of w and wbar.  Realness: coefficient at the swapped
# key equals the conjugate.
# ---------------------------------------------------------------------------


def _conj_key(key):
    a, b, jw, jwb = key
    return (b, a, jwb, jw)


def _padd(d1, d2):
    out = dict(d1)
    for k, v in d2.items():
        s = out.get(k)
        out[k] = v if s is None else s + v
    return {k: v for k, v in out.items() if not _pz(v)}


def _pz(v):
    if isinstance(v, ExactComplex):
        return v.is_zero()
    return v == 0


def _pscale(d, c):
    return {k: v * c for k, v in d.items()}


def _pmul(d1, d2):
    out = {}
    for (a1, b1, p1, q1), v1 in d1.items():
        for (a2, b2, p2, q2), v2 in d2.items():
            k = (
                tuple(x + y for x, y in zip(a1, a2)),
                tuple(x + y for x, y in zip(b1, b2)),
                p1 + p2,
                q1 + q2,
            )
            v = v1 * v2
            s = out.get(k)
            out[k] = v if s is None else s + v
    return {k: v for k, v in out.items() if not _pz(v)}


def _ppow(d, e, cache=None):
    if e == 0:
        raise StructuralError("zeroth power not used")
    if cache is not None and e in cache:
        return cache[e]
    out = d if e == 1 else _pmul(_ppow(d, e - 1, cache), d)
    if cache is not None:
        cache[e] = out
    return out


def _pconj(d):
    return {_conj_key(k): v.conjugate() for k, v in d.items()}


def _pdiff(d, slot, idx=None):
    """Derivative with respect to z_idx ('z'), zbar_idx ('zb'), w, or wb."""
    out = {}
    for (a, b, jw, jwb), v in d.items():
        if slot == "z":
            e = a[idx]
            if e == 0:
                continue
            a2 = list(a)
            a2[idx] -= 1
            k = (tuple(a2), b, jw, jwb)
        elif slot == "zb":
            e = b[idx]
            if e == 0:
                continue
            b2 = list(b)
            b2[idx] -= 1
            k = (a, tuple(b2), jw, jwb)
        elif slot == "w":
            e = jw
            if e == 0:
                continue
            k = (a, b, jw - 1, jwb)
        else:
            e = jwb
            if e == 0:
                continue
            k = (a, b, jw, jwb - 1)
        mult = v * e if not isinstance(v, ExactComplex) else v * ExactComplex(e)
        s = out.get(k)
        out[k] = mult if s is None else s + mult
    return out


def _peval(d, zs, w):
    zbs = [complex(z).conjugate() for z in zs]
    wb = complex(w).conjugate()
    total = 0j
    for (a, b, jw, jwb), v in d.items():
        t = complex(v)
        for i, e in enumerate(a):
            if e:
                t *= complex(zs[i]) ** e
        for i, e in enumerate(b):
            if e:
                t *= zbs[i] ** e
        if jw:
            t *= complex(w) ** jw
        if jwb:
            t *= wb ** jwb
        total += t
    return total


def _pshift(d, n, zs0, w0):
    """Taylor shift z -> z0 + z, w -> w0 + w (conjugate slots follow)."""
    zb0 = [complex(z).conjugate() for z in zs0]
    wb0 = complex(w0).conjugate()

    def shift_slot(cur, slot, idx, c):
        if c == 0:
            return cur
        out = {}
        for key, v in cur.items():
            a, b, jw, jwb = key
            e = (a[idx] if slot == "z" else b[idx] if slot == "zb"
                 else jw if slot == "w" else jwb)
            for kk in range(e + 1):
                coef = complex(v) * math.comb(e, kk) * c ** (e - kk)
                if slot == "z":
                    a2 = list(a)
                    a2[idx] = kk
                    k2 = (tuple(a2), b, jw, jwb)
                elif slot == "zb":
                    b2 = list(b)
                    b2[idx] = kk
                    k2 = (a, tuple(b2), jw, jwb)
                elif slot == "w":
                    k2 = (a, b, kk, jwb)
                else:
                    k2 = (a, b, jw, kk)
                s = out.get(k2)
                out[k2] = coef if s is None else s + coef
        return {k: v for k, v in out.items() if v != 0}

    cur = {k: complex(v) for k, v in d.items()}
    for i in range(n):
        cur = shift_slot(cur, "z", i, complex(zs0[i]))
        cur = shift_slot(cur, "zb", i, zb0[i])
    cur = shift_slot(cur, "w", None, complex(w0))
    cur = shift_slot(cur, "wb", None, wb0)
    return cur


def _graph_to_rho(graph, n):
    """Embed a graph polynomial Phi(z, zbar, u) as Phi - v in implicit
    coordinates, with u = (w + wbar)/2 and v = (w - wbar)/(2i)."""
    half = ExactComplex(QQ(1, 2))
    ihalf = ExactComplex(0, QQ(1, 2))
    rho = {}
    for (a, b, j), v in graph.items():
        v = v if isinstance(v, ExactComplex) else ExactComplex(v)
        for s in range(j + 1):
            c = v * ExactComplex(QQ(math.comb(j, s), 2 ** j))
            k = (tuple(a), tuple(b), s, j - s)
            old = rho.get(k)
            rho[k] = c if old is None else old + c
    zv = (0,) * n
    for key, c in (((zv, zv, 1, 0), ihalf), ((zv, zv, 0, 1), -ihalf)):
        old = rho.get(key)
        rho[key] = c if old is None else old + c
    return {k: v for k, v in rho.items() if not _pz(v)}


class AnalyticSurface:
    """Global polynomial defining function rho = 0 with exact coefficients,
    through the origin, with the float evaluation machinery attached."""

    def __init__(self, rho, n, r):
        self.n = n
        self.r = r
        self.rho = {k: (v if isinstance(v, ExactComplex) else ExactComplex(v))
                    for k, v in rho.items() if not _pz(v)}
        zv = (0,) * n
        if not _pz(self.rho.get((zv, zv, 0, 0), ExactComplex(0))):
            raise DomainError("defining polynomial does not vanish at the origin")
        for k, v in self.rho.items():
            w = self.rho.get(_conj_key(k))
            if w is None or not (w.conjugate() - v).is_zero():
                raise DomainError("defining polynomial is not real")
        self._float = {k: complex(v) for k, v in self.rho.items()}
        self._derivs = self._make_derivs(self._float)

    def _make_derivs(self, base):
        n = self.n
        d = {"rho": base}
        d["z"] = [_pdiff(base, "z", i) for i in range(n)]
        d["zb"] = [_pdiff(base, "zb", i) for i in range(n)]
        d["w"] = _pdiff(base, "w")
        d["wb"] = _pdiff(base, "wb")
        d["zzb"] = [[_pdiff(d["z"][i], "zb", j) for j in range(n)]
                    for i in range(n)]
        d["zwb"] = [_pdiff(d["z"][i], "wb") for i in range(n)]
        d["wzb"] = [_pdiff(d["w"], "zb", j) for j in range(n)]
        d["wwb"] = _pdiff(d["w"], "wb")
        return d

    @classmethod
    def from_graph(cls, graph, n, r):
        """Build from a graph polynomial {(a, b, j): coeff} for
        v = Phi(z, zbar, u)."""
        return cls(_graph_to_rho(graph, n), n, r)

    @classmethod
    def model(cls, n, r):
        """v = <z', zbar'> + 2 Re(z_n^2 zbar_n) (2D: v = 2 Re(z^2 zbar))."""
        graph = {}
        one = ExactComplex(1)
        if n > 1:
            for i in range(n - 1):
                a = [0] * n
                a[i] = 1
                eps = one if i < r else -one
                graph[(tuple(a), tuple(a), 0)] = eps
        an = [0] * n
        an[n - 1] = 2
        bn = [0] * n
        bn[n - 1] = 1
        graph[(tuple(an), tuple(bn), 0)] = one
        graph[(tuple(bn), tuple(an), 0)] = one
        return cls.from_graph(graph, n, r)

    def pullback(self, fmap):
        """Preimage surface rho o F for a polynomial holomorphic map F given
        as n+1 dicts {(a, jw): coeff} for the z components and the w
        component.  Exact composition."""
        n = self.n
        images = []
        for comp in fmap:
            img = {}
            for (a, jw), v in comp.items():
                v = v if isinstance(v, ExactComplex) else ExactComplex(v)
                img[(tuple(a), (0,) * n, jw, 0)] = v
            images.append(img)
        conj_images = [_pconj(img) for img in images]
        zv = (0,) * n
        out = {}
        caches = [dict() for _ in range(2 * n + 2)]
        for (a, b, jw, jwb), v in self.rho.items():
            term = {(zv, zv, 0, 0): v}
            for i, e in enumerate(a):
                if e:
                    term = _pmul(term, _ppow(images[i], e, caches[i]))
            for i, e in enumerate(b):
                if e:
                    term = _pmul(term, _ppow(conj_images[i], e, caches[n + i]))
            if jw:
                term = _pmul(term, _ppow(images[n], jw, caches[2 * n]))
            if jwb:
                term = _pmul(term, _ppow(conj_images[n], jwb, caches[2 * n + 1]))
            out = _padd(out, term)
        return AnalyticSurface(out, n, self.r)

    # -- float evaluation ------------------------------------------------
    def defining_value(self, p):
        zs, w = p
        return _peval(self._derivs["rho"], zs, w).real


# ---------------------------------------------------------------------------
# point utilities: points are (zs: tuple of complex, w: complex); the real
# chart used by the numerics is (Re z_1, Im z_1, .., Re w, Im w).
# ---------------------------------------------------------------------------


def _to_real(p):
    zs, w = p
    out = []
    for z in list(zs) + [w]:
        out.append(complex(z).real)
        out.append(complex(z).imag)
    return np.array(out, dtype=float)


def _to_point(x, n):
    vals = [complex(x[2 * i], x[2 * i + 1]) for i in range(n + 1)]
    return (tuple(vals[:n]), vals[n])


def _cvec_to_real(vs):
    out = []
    for v in vs:
        out.append(complex(v).real)
        out.append(complex(v).imag)
    return np.array(out, dtype=float)


# ---------------------------------------------------------------------------
# Levi geometry at a point
# ---------------------------------------------------------------------------


def levi_matrix_at(S, p):
    """Levi matrix of rho restricted to the complex tangent space, in the
    frame X_i = d/dz_i - (rho_{z_i}/rho_w) d/dw."""
    zs, w = p
    n = S.n
    d = S._derivs
    rz = [_peval(d["z"][i], zs, w) for i in range(n)]
    rw = _peval(d["w"], zs, w)
    if abs(rw) < 1e-12:
        raise NumericalError("defining function is not transverse to the w fiber")
    rwb = rw.conjugate()
    rzb = [v.conjugate() for v in rz]
    L = np.zeros((n, n), dtype=complex)
    rww = _peval(d["wwb"], zs, w)
    for i in range(n):
        rzwb_i = _peval(d["zwb"][i], zs, w)
        for j in range(n):
            val = _peval(d["zzb"][i][j], zs, w)
            val -= rzwb_i * rzb[j] / rwb
            val -= _peval(d["wzb"][j], zs, w) * rz[i] / rw
            val += rww * rz[i] * rzb[j] / (rw * rwb)
            L[i, j] = val
    return L


def levi_determinant_at(S, p):
    L = levi_matrix_at(S, p)
    det = np.linalg.det(L)
    return det.real


def _residuals(S, p):
    return S.defining_value(p), levi_determinant_at(S, p)


def _grad_fd(fun, x, n, h=1e-6):
    g = np.zeros(2 * n + 2)
    for i in range(2 * n + 2):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(_to_point(xp, n)) - fun(_to_point(xm, n))) / (2 * h)
    return g


def _grad_rho(S, p):
    zs, w = p
    n = S.n
    d = S._derivs
    parts = [_peval(d["z"][i], zs, w) for i in range(n)] + [_peval(d["w"], zs, w)]
    g = []
    for v in parts:
        g.append(2 * v.real)
        g.append(-2 * v.imag)
    return np.array(g)


def project_to_sigma(S, p0, tol=1e-12, max_iter=50):
    """Gauss-Newton (minimal-norm step) onto {rho = 0, Levi det = 0}."""
    n = S.n
    x = _to_real(p0)
    for _ in range(max_iter):
        p = _to_point(x, n)
        r1, r2 = _residuals(S, p)
        if abs(r1) <= tol and abs(r2) <= tol:
            return p
        J = np.vstack([
            _grad_rho(S, p),
            _grad_fd(lambda q: levi_determinant_at(S, q), x, n),
        ])
        G = np.array([r1, r2])
        JJt = J @ J.T
        if abs(np.linalg.det(JJt)) < 1e-18:
            raise NumericalError("degeneracy-set projection lost rank")
        x = x - J.T @ np.linalg.solve(JJt, G)
        if not np.all(np.isfinite(x)):
            raise NumericalError("degeneracy-set projection diverged")
    raise NumericalError(
        "projection onto the degeneracy set did not converge in %d iterations"
        % max_iter
    )


# ---------------------------------------------------------------------------
# local graph jet at a point on the surface
# ---------------------------------------------------------------------------


def local_graph_jet(S, p, W):
    """Recenter at p (on the surface) and solve the local graph
    v = Phi(z, zbar, u) from the implicit jet.  Returns a raw
    plain-degree HypersurfaceJet in float mode."""
    n = S.n
    zs0, w0 = p
    shifted = _pshift(S._float, n, zs0, w0)
    zv = (0,) * n
    c0 = shifted.get((zv, zv, 0, 0), 0)
    if abs(c0) > 1e-9:
        raise DomainError("recentering point does not lie on the surface")
    shifted.pop((zv, zv, 0, 0), None)
    rw = shifted.get((zv, zv, 1, 0), 0)
    rwb = shifted.get((zv, zv, 0, 1), 0)
    rv0 = complex(0, 1) * (rw - rwb)
    if abs(rv0) < 1e-9:
        raise NumericalError("surface is not a graph over the v = 0 chart here")
    # implicit jet in n+1 complex variables (z_1..z_n, w), u-degree unused
    weights1 = unit_weights(n + 1)
    rho_jet = RealJet.zero(n + 1, weights1, W, exact=False)
    for (a, b, jw, jwb), v in shifted.items():
        key = (tuple(a) + (jw,), tuple(b) + (jwb,), 0)
        if rho_jet.key_weight(key) <= W:
            rho_jet.set_coeff(key, rho_jet.coeff(key) + v)
    weights = unit_weights(n)
    U = RealJet.var_u(n, weights, W, exact=False)
    Zs = [RealJet.var_z(n, weights, W, i, exact=False) for i in range(n)]
    Zbs = [RealJet.var_zbar(n, weights, W, i, exact=False) for i in range(n)]
    phi = RealJet.zero(n, weights, W, exact=False)
    iunit = complex(0, 1)
    for _ in range(W + 2):
        Wimg = U + phi.scale(iunit)
        Wbimg = U - phi.scale(iunit)
        res = subst_real(rho_jet, Zs + [Wimg], Zbs + [Wbimg],
                         RealJet.zero(n, weights, W, exact=False))
        res = res._like({k: v for k, v in res.c.items() if abs(v) > 1e-13})
        if res.is_zero():
            break
        phi = phi - res.scale(1.0 / rv0)
    else:
        raise NumericalError("implicit graph solve did not converge")
    if not phi.is_real(tol=1e-9):
        raise NumericalError("implicit graph solve produced a non-real graph")
    # symmetrize away rounding noise
    sym = {}
    for (a, b, j), v in phi.c.items():
        vv = 0.5 * (v + phi.coeff((b, a, j)).conjugate())
        if abs(vv) > 1e-13:
            sym[(a, b, j)] = vv
    phi = phi._like(sym)
    return HypersurfaceJet(phi, r=S.r, level="raw")


# ---------------------------------------------------------------------------
# float preliminary adaptation (mirrors the exact one, numpy linear algebra)
# ---------------------------------------------------------------------------


def _adapt_float(H, tol=1e-9):
    """Float analogue of the exact preliminary adaptation: returns the
    simplified surface on the anisotropic grid and the total plain-grid
    map."""
    from .series import surface_weights

    n, M = H.n, H.M
    weights = unit_weights(n)
    cur = H
    total = _linear_map(n, M, exact=False)
    state = {"cur": cur, "total": total}

    def apply(F):
        state["cur"] = push_forward_linear(state["cur"], F)
        state["total"] = F.compose(state["total"])

    def coeffc(key):
        return complex(state["cur"].phi.coeff(key))

    zv = (0,) * n
    # tangent alignment
    for _ in range(4):
        cz = []
        for i in range(n):
            a = [0] * n
            a[i] = 1
            cz.append(coeffc((tuple(a), zv, 0)))
        au = coeffc((zv, zv, 1))
        if all(abs(c) <= tol for c in cz) and abs(au) <= tol:
            break
        g = HoloJet.var_w(n, weights, M, exact=False)
        if any(abs(c) > tol for c in cz):
            for i in range(n):
                if abs(cz[i]) > tol:
                    a = [0] * n
                    a[i] = 1
                    g.set_coeff((tuple(a), 0), cz[i] * complex(0, -2))
            apply(_linear_map(n, M, g=g, exact=False))
            continue
        if abs(au.imag) > 1e-6:
            raise NumericalError("graph function lost realness in adaptation")
        g = g.scale(complex(1, -au.real))
        apply(_linear_map(n, M, g=g, exact=False))
    else:
        raise NumericalError("tangent alignment did not terminate")

    # Levi normal form at the origin
    if n > 1:
        L0 = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                ei = [0] * n
                ei[i] = 1
                ej = [0] * n
                ej[j] = 1
                L0[i, j] = coeffc((tuple(ei), tuple(ej), 0))
        lam, U = np.linalg.eigh(L0)
        small = [k for k in range(n) if abs(lam[k]) < 1e-6]
        if len(small) != 1:
            raise GenericityError(
                "Levi kernel at the point has dimension %d, need 1" % len(small)
            )
        order = ([k for k in range(n) if lam[k] > 1e-6]
                 + [k for k in range(n) if lam[k] < -1e-6] + small)
        scales = np.array([1.0 if k in small else 1.0 / math.sqrt(abs(lam[k]))
                           for k in order])
        T = U[:, order].conjugate() * scales[None, :]
        fz = np.linalg.inv(T.conjugate())
        apply(_linear_map(n, M, fz=[[fz[i, j] for j in range(n)]
                                    for i in range(n)], exact=False))
        # align the nondegenerate directions with the annihilator of the
        # degenerate cubic
        an = [0] * n
        an[n - 1] = 2
        bn = [0] * n
        bn[n - 1] = 1
        e = coeffc((tuple(an), tuple(bn), 0))
        if abs(e) < 1e-9:
            raise GenericityError("degenerate cubic coefficient vanishes")
        shear = np.eye(n, dtype=complex)
        for q in range(n - 1):
            aq = [0] * n
            aq[q] = 1
            aq[n - 1] = 1
            tq = coeffc((tuple(aq), tuple(bn), 0))
            shear[n - 1, q] = tq / (2 * e)
        if np.max(np.abs(shear - np.eye(n))) > tol:
            apply(_linear_map(n, M, fz=[[shear[i, j] for j in range(n)]
                                        for i in range(n)], exact=False))

    # scale the degenerate cubic to one
    an = [0] * n
    an[n - 1] = 2
    bn = [0] * n
    bn[n - 1] = 1
    e = coeffc((tuple(an), tuple(bn), 0))
    if abs(e) < 1e-9:
        raise GenericityError("degenerate cubic coefficient vanishes")
    t = 1.0
    if n > 1:
        a1 = [0] * n
        a1[0] = 1
        t = abs(coeffc((tuple(a1), tuple(a1), 0)).real)
    mu = abs(e) ** 2 * t ** 3
    fzm = np.eye(n, dtype=complex)
    fzm[n - 1, n - 1] = e * t
    g = HoloJet.var_w(n, weights, M, exact=False).scale(complex(mu))
    apply(_linear_map(n, M, fz=[[fzm[i, j] for j in range(n)]
                                for i in range(n)], g=g, exact=False))

    # scale the Levi eigenvalues to +-1
    if n > 1:
        fzm = np.eye(n, dtype=complex)
        needed = False
        for j in range(n - 1):
            a = [0] * n
            a[j] = 1
            dj = coeffc((tuple(a), tuple(a), 0)).real
            mj = abs(dj)
            if abs(mj - 1.0) > 1e-13:
                fzm[j, j] = math.sqrt(mj)
                needed = True
        if needed:
            apply(_linear_map(n, M, fz=[[fzm[i, j] for j in range(n)]
                                        for i in range(n)], exact=False))

    # kill pure-holomorphic terms of low weight
    wz, wu = surface_weights(n)
    for _ in range(2 * M + 2):
        offenders = [
            (a, v)
            for (a, b, j), v in state["cur"].phi.c.items()
            if sum(b) == 0 and j == 0 and sum(a) >= 1 and abs(v) > 1e-12
            and sum(wz[i] * a[i] for i in range(n)) <= wu
        ]
        if not offenders:
            break
        a, cv = min(offenders, key=lambda tpl: sum(tpl[0]))
        g = HoloJet.var_w(n, weights, M, exact=False)
        g.set_coeff((a, 0), complex(cv) * complex(0, -2))
        apply(_linear_map(n, M, g=g, exact=False))
    else:
        raise NumericalError("holomorphic-term removal did not terminate")

    phi_w = state["cur"].phi.with_weights(surface_weights(n), M)
    out = HypersurfaceJet(phi_w, r=H.r, level="simplified")
    return out, state["total"]


# ---------------------------------------------------------------------------
# slope fields
# ---------------------------------------------------------------------------

_W_START = {True: 6, False: 8}  # keyed by (n == 1)
_W_MAX = 12


@dataclass
class SlopeDirection:
    vector: np.ndarray  # unit vector in the real chart, canonical sign
    weight: int  # jet weight at which the direction stabilized


def _canonical_sign(v):
    for x in v:
        if abs(x) > 1e-8:
            return v if x > 0 else -v
    return v


def _direction_at_weight(S, p, W):
    H = local_graph_jet(S, p, W)
    Hs, A = _adapt_float(H)
    fn = formal_normalize(Hs)
    n = S.n
    DA = np.array([[complex(v) for v in row] for row in A.linear_part()])
    DF = np.array([[complex(v) for v in row] for row in fn.map.linear_part()])
    D = DF @ DA
    e = np.zeros(n + 1, dtype=complex)
    e[n] = 1.0
    vec = np.linalg.solve(D, e)
    rvec = _cvec_to_real(vec)
    nrm = np.linalg.norm(rvec)
    if not np.isfinite(nrm) or nrm < 1e-12:
        raise NumericalError("transverse slope direction degenerated")
    return _canonical_sign(rvec / nrm)


def slope_field_transverse(S, p, weight=None, stability_tol=1e-10):
    """Real line of the transverse slope field at a point of the degeneracy
    set: the pullback of the model transverse direction through the
    differential of the float normalization of the recentered jet.  The jet
    weight is escalated until the direction is stable."""
    if weight is not None:
        return SlopeDirection(_direction_at_weight(S, p, weight), weight)
    W = _W_START[S.n == 1]
    prev = _direction_at_weight(S, p, W)
    while W < _W_MAX:
        W += 1
        cur = _direction_at_weight(S, p, W)
        if min(np.linalg.norm(cur - prev), np.linalg.norm(cur + prev)) \
                <= stability_tol:
            return SlopeDirection(_canonical_sign(cur), W)
        prev = cur
    raise NumericalError(
        "transverse slope direction did not stabilize up to weight %d" % _W_MAX
    )


def slope_field_tangent(S, p):
    """Real line K_p ∩ T_p(degeneracy set): the Levi-kernel complex
    direction intersected with the tangent space of the Levi-determinant
    zero set."""
    n = S.n
    L = levi_matrix_at(S, p)
    lam, U = np.linalg.eigh((L + L.conjugate().T) / 2)
    idx = np.argsort(np.abs(lam))
    if n > 1 and abs(lam[idx[1]]) < 1e-6:
        raise NumericalError("Levi kernel is not 1-dimensional here")
    k = U[:, idx[0]]
    zs, w = p
    d = S._derivs
    rz = np.array([_peval(d["z"][i], zs, w) for i in range(n)])
    rw = _peval(d["w"], zs, w)
    wcomp = -np.dot(k, rz) / rw
    X = np.concatenate([k, [wcomp]])
    Xr = _cvec_to_real(X)
    Xi = _cvec_to_real(1j * X)
    x = _to_real(p)
    G = _grad_fd(lambda q: levi_determinant_at(S, q), x, n)
    a = float(G @ Xr)
    b = float(G @ Xi)
    scale = np.linalg.norm(G) * max(np.linalg.norm(Xr), np.linalg.norm(Xi))
    if math.hypot(a, b) <= 1e-10 * max(scale, 1e-30):
        raise NumericalError(
            "kernel direction is tangent to the degeneracy set on a "
            "2-plane; intersection is not 1-dimensional"
        )
    vec = b * Xr - a * Xi
    return _canonical_sign(vec / np.linalg.norm(vec))


# ---------------------------------------------------------------------------
# chain tracing
# ---------------------------------------------------------------------------


@dataclass
class ChainTrace:
    points: list  # [(zs, w)] double-precision points
    params: list  # arc parameters
    slope_residuals: list  # per-point {"on_surface":, "on_sigma":, "weight":}
    step_size: float
    method: str = "rk4"


def trace_chain(S, p0, length, step, method="rk4", recheck_every=100):
    """Trace the degenerate chain through p0: classical 4th-order
    integration of the transverse slope field with re-projection onto the
    degeneracy set after every step."""
    if method != "rk4":
        raise StructuralError("unknown integration method %r" % (method,))
    if step <= 0:
        raise DomainError("step size must be positive")
    n = S.n
    p = project_to_sigma(S, p0)
    first = slope_field_transverse(S, p)
    W = first.weight

    def record(pt, w_used):
        r1, r2 = _residuals(S, pt)
        return {"on_surface": abs(r1), "on_sigma": abs(r2), "weight": w_used}

    points = [p]
    params = [0.0]
    diags = [record(p, W)]
    nsteps = int(round(length / step)) if length > 0 else 0
    if nsteps == 0:
        return ChainTrace(points, params, diags, step, method)

    ref = {"dir": first.vector}

    def field(x):
        v = slope_field_transverse(S, _to_point(x, n), weight=W).vector
        if float(v @ ref["dir"]) < 0:
            v = -v
        return v

    x = _to_real(p)
    for k in range(nsteps):
        if k and recheck_every and k % recheck_every == 0:
            sd = slope_field_transverse(S, _to_point(x, n))
            W = sd.weight
        k1 = field(x)
        ref_prev = ref["dir"]
        ref["dir"] = k1
        k2 = field(x + 0.5 * step * k1)
        k3 = field(x + 0.5 * step * k2)
        k4 = field(x + step * k3)
        x = x + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        pt = project_to_sigma(S, _to_point(x, n))
        x = _to_real(pt)
        ref["dir"] = k1 if float(k1 @ ref_prev) != 0 else ref["dir"]
        points.append(pt)
        params.append((k + 1) * step)
        diags.append(record(pt, W))
    return ChainTrace(points, params, diags, step, method)
