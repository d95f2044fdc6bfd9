"""Real hypersurface jets v = Phi(z, zbar, u), Levi geometry and adaptation.

A surface is stored as a graph jet Phi over the real hyperplane, with two
gradings in play:

* the plain-degree grading (all variables weight one), used for raw input
  and for the preliminary linear adaptation, where arbitrary invertible
  linear changes of coordinates occur and only the total degree of a term
  is preserved;
* the anisotropic grading ([z_a] = 3 for the nondegenerate directions,
  [z_n] = 2, [u] = 6 when n > 1; [z] = 1, [u] = 3 when n = 1), used from
  the simplified stage onwards, where every map applied is graded-positive
  so weighted truncation is sound.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    ConsistencyError,
    DomainError,
    GenericityError,
    ModeError,
    StructuralError,
)
from .linalg import hermitian_congruence, invert_matrix, kernel_exact
from .maps import MapJet, ModelFrame, signature_eps
from .scalars import (
    EC_I,
    EC_ONE,
    EC_ZERO,
    ExactComplex,
    QQ,
    rational_sqrt,
    s_is_zero,
    units_for,
)
from .series import (
    HoloJet,
    RealJet,
    subst_real,
    surface_weights,
    unit_weights,
)


# ---------------------------------------------------------------------------
# the model surface
# ---------------------------------------------------------------------------

def model_phi(n, r, M, exact=True, weights=None):
    """Graph function of the model: n=1: 2 Re(z^2 zbar); n>1: the Levi form
    on the nondegenerate directions plus the degenerate cubic in z_n."""
    if weights is None:
        weights = surface_weights(n)
    phi = RealJet.zero(n, weights, M, exact)
    if n == 1:
        phi = phi + RealJet.monomial(1, weights, M, (2,), (1,), 0, 1, exact)
        phi = phi + RealJet.monomial(1, weights, M, (1,), (2,), 0, 1, exact)
        return phi
    eps = signature_eps(n, r)
    for j in range(n - 1):
        a = [0] * n
        a[j] = 1
        phi = phi + RealJet.monomial(n, weights, M, tuple(a), tuple(a), 0, eps[j], exact)
    an = [0] * n
    an[n - 1] = 2
    bn = [0] * n
    bn[n - 1] = 1
    phi = phi + RealJet.monomial(n, weights, M, tuple(an), tuple(bn), 0, 1, exact)
    phi = phi + RealJet.monomial(n, weights, M, tuple(bn), tuple(an), 0, 1, exact)
    return phi


class HypersurfaceJet:
    """Truncated graph v = Phi(z, zbar, u) through the origin."""

    __slots__ = ("phi", "n", "r", "M", "level")

    LEVELS = ("raw", "simplified", "prenormal", "normal")

    def __init__(self, phi, r=None, level="raw"):
        if level not in self.LEVELS:
            raise StructuralError("unknown surface level %r" % (level,))
        self.phi = phi
        self.n = phi.n
        self.r = r
        self.M = phi.M
        self.level = level
        self.validate()

    def validate(self):
        tol = None if self.phi.exact else 1e-9
        origin = self.phi.coeff(((0,) * self.n, (0,) * self.n, 0))
        if (abs(complex(origin)) > tol) if tol else (not origin.is_zero()):
            raise DomainError("surface does not pass through the origin")
        if not self.phi.is_real(tol=tol):
            raise DomainError("graph function is not real")

    @property
    def exact(self):
        return self.phi.exact

    @staticmethod
    def model(n, r, M, exact=True):
        return HypersurfaceJet(model_phi(n, r, M, exact), r=r, level="normal")

    def copy(self, level=None):
        return HypersurfaceJet(
            self.phi.copy(), r=self.r, level=self.level if level is None else level
        )

    def model_part(self):
        return model_phi(self.n, self.r if self.r is not None else self.n - 1,
                         self.M, self.exact, weights=self.phi.weights)

    def is_simplified(self):
        """Phi = P + (weight > [u]) on the anisotropic grid."""
        wu = self.phi.wu
        low = self.phi.weight_range(0, wu)
        return low == self.model_part().weight_range(0, wu)


# ---------------------------------------------------------------------------
# push-forward of a surface through a map
# ---------------------------------------------------------------------------

def _graph_data(phi, F):
    Zs = [f.restrict_to_graph(phi) for f in F.fs]
    W = F.g.restrict_to_graph(phi)
    return Zs, [Z.conjugate() for Z in Zs], W.re_part(), W.im_part()


def push_forward_weighted(H, F):
    """Image surface under a graded-positive map whose weighted-lowest part
    is the identity (the normalized class).  Iterates weight by weight; no
    inversion is needed because the new graph agrees with the old one to
    leading weight."""
    if not F.is_normalized_class():
        raise StructuralError("weighted push-forward needs a normalized-class map")
    phi = H.phi
    Zs, Zbars, U, V = _graph_data(phi, F)
    out = phi._like({})
    R = V
    for m in range(1, phi.M + 1):
        Rm = R.weighted_component(m)
        if Rm.is_zero():
            continue
        out = out + Rm
        R = R - subst_real(Rm, Zs, Zbars, U)
    if not R.is_zero():
        raise ConsistencyError("weighted push-forward did not converge")
    if not out.is_real():
        raise ConsistencyError("push-forward produced a non-real graph")
    return HypersurfaceJet(out, r=H.r, level=H.level)


def push_forward_frame(H, frame):
    """Image under a model frame map, by exact coefficient transport."""
    phi = H.phi
    n = H.n
    out = phi._like({})
    if n == 1:
        lam = QQ(frame.lam)
        for (a, b, j), v in phi.c.items():
            s = lam ** (3 - a[0] - b[0] - 3 * j)
            out.c[(a, b, j)] = v * ExactComplex(s)
        return HypersurfaceJet(out, r=H.r, level=H.level)
    # z' = lam^3 C zv, z_n' = rho lam^2 z_n, w' = rho lam^6 w;
    # Phi'(z') = rho lam^6 Phi(C^-1 zv'/lam^3, rho z_n'/lam^2, rho u'/lam^6).
    lam = QQ(frame.lam)
    Cinv = invert_matrix(frame.C)
    M, weights, exact = phi.M, phi.weights, phi.exact
    Zs = []
    for i in range(n - 1):
        img = RealJet.zero(n, weights, M, exact)
        for j in range(n - 1):
            if not Cinv[i][j].is_zero():
                img = img + RealJet.var_z(n, weights, M, j, exact).scale(
                    Cinv[i][j] * ExactComplex(QQ(1) / lam**3)
                )
        Zs.append(img)
    Zs.append(
        RealJet.var_z(n, weights, M, n - 1, exact).scale(
            ExactComplex(frame.rho / lam**2)
        )
    )
    Zbars = [Z.conjugate() for Z in Zs]
    U = RealJet.var_u(n, weights, M, exact).scale(ExactComplex(frame.rho / lam**6))
    out = subst_real(phi, Zs, Zbars, U).scale(ExactComplex(frame.rho * lam**6))
    return HypersurfaceJet(out, r=H.r, level=H.level)


def push_forward_linear(H, F):
    """Image under an invertible map on the plain-degree grid.  The graph is
    re-solved degree by degree through the inverse of the real-linear base
    change on (z, zbar, u)."""
    phi = H.phi
    n = H.n
    for comp in F.components():
        if not s_is_zero(comp.coeff(((0,) * n, 0))):
            raise DomainError("push-forward maps must fix the origin")
    Zs, Zbars, U, V = _graph_data(phi, F)
    M, weights, exact = phi.M, phi.weights, phi.exact
    # real-linear base change on variables (z_1..z_n, zbar_1..zbar_n, u)
    dim = 2 * n + 1
    one, _, _ = units_for(exact)
    zero = one - one
    B = [[zero] * dim for _ in range(dim)]

    def lin_row(jet):
        row = []
        for j in range(n):
            a = [0] * n
            a[j] = 1
            row.append(jet.coeff((tuple(a), (0,) * n, 0)))
        for j in range(n):
            b = [0] * n
            b[j] = 1
            row.append(jet.coeff(((0,) * n, tuple(b), 0)))
        row.append(jet.coeff(((0,) * n, (0,) * n, 1)))
        return row

    for i in range(n):
        B[i] = lin_row(Zs[i])
        B[n + i] = lin_row(Zbars[i])
    B[2 * n] = lin_row(U)
    if exact:
        try:
            Binv = invert_matrix(B)
        except Exception:
            raise DomainError("map is not transverse to the graph structure")
    else:
        import numpy as np

        Bm = np.array([[complex(v) for v in row] for row in B])
        if abs(np.linalg.det(Bm)) < 1e-12:
            raise DomainError("map is not transverse to the graph structure")
        Binv = [[complex(v) for v in row] for row in np.linalg.inv(Bm)]
    basis = (
        [RealJet.var_z(n, weights, M, i, exact) for i in range(n)]
        + [RealJet.var_zbar(n, weights, M, i, exact) for i in range(n)]
        + [RealJet.var_u(n, weights, M, exact)]
    )

    def pullback_row(i):
        img = RealJet.zero(n, weights, M, exact)
        for j in range(dim):
            if not s_is_zero(Binv[i][j]):
                img = img + basis[j].scale(Binv[i][j])
        return img

    inv_z = [pullback_row(i) for i in range(n)]
    inv_zb = [pullback_row(n + i) for i in range(n)]
    inv_u = pullback_row(2 * n)
    tol = None if exact else 1e-11

    def negligible(jet):
        if tol is None:
            return jet.is_zero()
        return all(abs(complex(v)) <= tol for v in jet.c.values())

    out = phi._like({})
    R = V
    for _ in range(M + 1):
        if tol is not None:
            R = R._like({k: v for k, v in R.c.items()
                         if abs(complex(v)) > tol})
        if negligible(R):
            break
        d0 = R.min_weight()
        psi = subst_real(R.weighted_component(d0), inv_z, inv_zb, inv_u)
        out = out + psi
        R = R - subst_real(psi, Zs, Zbars, U)
    if not negligible(R):
        raise ConsistencyError("degree push-forward did not converge")
    if not out.is_real(tol=tol):
        raise ConsistencyError("push-forward produced a non-real graph")
    if tol is not None:
        out = out._like({k: v for k, v in out.c.items()
                         if abs(complex(v)) > tol})
    return HypersurfaceJet(out, r=H.r, level=H.level)


def push_forward(H, F):
    """Dispatch on the grid: frames and normalized maps on the anisotropic
    grid, general invertible maps on the plain-degree grid."""
    if isinstance(F, ModelFrame):
        return push_forward_frame(H, F)
    if H.phi.weights == unit_weights(H.n):
        return push_forward_linear(H, F)
    if F.is_normalized_class():
        return push_forward_weighted(H, F)
    from .maps import decompose_map

    frame, Ft = decompose_map(F)
    return push_forward_weighted(push_forward_frame(H, frame), Ft)


# ---------------------------------------------------------------------------
# Levi geometry
# ---------------------------------------------------------------------------

def _rho_derivatives(phi):
    """First and second derivatives of rho = Phi - v as jets on the graph
    variables, with the w-direction expressed through u:
    rho_w = Phi_u/2 + i/2, rho_{w wbar} = Phi_{uu}/4, etc."""
    one, iu, half = units_for(phi.exact)
    n = phi.n
    d = {}
    d["z"] = [phi.diff_z(a) for a in range(n)]
    d["w"] = phi.diff_u().scale(half) + phi._like({}).one_like().scale(iu * half)
    d["zz"] = [[phi.diff_z(a).diff_zbar(b) for b in range(n)] for a in range(n)]
    d["zw"] = [phi.diff_z(a).diff_u().scale(half) for a in range(n)]  # rho_{z_a wbar}
    d["wz"] = [phi.diff_u().diff_zbar(b).scale(half) for b in range(n)]  # rho_{w zbar_b}
    d["ww"] = phi.diff_u().diff_u().scale(half * half)
    return d


def levi_matrix_scaled(H):
    """|rho_w|^2 times the tangential Levi matrix, as an n x n matrix of
    polynomial jets: Ltil_ab = rho_{z_a zbar_b} rho_w rhobar_w
    - rho_{z_a} rhobar_w rho_{w zbar_b} - rhobar_{z_b} rho_w rho_{z_a wbar}
    + rho_{z_a} rhobar_{z_b} rho_{w wbar}."""
    phi = H.phi
    d = _rho_derivatives(phi)
    rw = d["w"]
    rwb = rw.conjugate()
    n = H.n
    out = []
    for a in range(n):
        row = []
        ra = d["z"][a]
        for b in range(n):
            rbb = d["z"][b].conjugate()
            t = d["zz"][a][b] * rw * rwb
            t = t - ra * rwb * d["wz"][b]
            t = t - rbb * rw * d["zw"][a]
            t = t + ra * rbb * d["ww"]
            row.append(t)
        out.append(row)
    return out


def _jet_det(mat):
    k = len(mat)
    if k == 1:
        return mat[0][0]
    acc = None
    for j in range(k):
        minor = [[mat[i][c] for c in range(k) if c != j] for i in range(1, k)]
        term = mat[0][j] * _jet_det(minor)
        if j % 2 == 1:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def levi_determinant(H):
    """Real polynomial jet cutting out the Levi-degeneracy set Sigma (up to
    the nonvanishing factor |rho_w|^{2n})."""
    Lt = levi_matrix_scaled(H)
    det = _jet_det(Lt)
    if H.exact and not det.is_real():
        raise ConsistencyError("Levi determinant is not real")
    return det


# ---------------------------------------------------------------------------
# pointwise invariants at the origin
# ---------------------------------------------------------------------------

def _eval_poly(phi, zvals, zbarvals, uval):
    one, _, _ = units_for(phi.exact)
    zero = one - one
    acc = zero
    for (a, b, j), v in phi.c.items():
        term = v
        for i, e in enumerate(a):
            for _ in range(e):
                term = term * zvals[i]
        for i, e in enumerate(b):
            for _ in range(e):
                term = term * zbarvals[i]
        for _ in range(j):
            term = term * uval
        acc = acc + term
    return acc


@dataclass
class InvariantReport:
    n: int
    levi_matrix: list
    kernel: list = field(default_factory=list)
    kernel_dim: int = 0
    signature: tuple = (0, 0)  # (positives, negatives) among nonzero
    cubic: object = None  # degenerate cubic coefficient along the kernel
    tangency_vector: list = field(default_factory=list)
    generic: bool = False
    reason: str = ""


def invariants_at_origin(H):
    phi = H.phi
    n = H.n
    one, _, _ = units_for(phi.exact)
    zero = one - one
    Hmat = []
    for a in range(n):
        row = []
        for b in range(n):
            ea = [0] * n
            eb = [0] * n
            ea[a] = 1
            eb[b] = 1
            row.append(phi.coeff((tuple(ea), tuple(eb), 0)))
        Hmat.append(row)
    rep = InvariantReport(n=n, levi_matrix=Hmat)
    ker = kernel_exact(Hmat) if n > 1 else ([[one]] if Hmat[0][0].is_zero() else [])
    rep.kernel = ker
    rep.kernel_dim = len(ker)
    if n > 1 or not Hmat[0][0].is_zero():
        _, diag = hermitian_congruence([row[:] for row in Hmat])
        pos = sum(1 for d in diag if d.re > 0)
        neg = sum(1 for d in diag if d.re < 0)
        rep.signature = (pos, neg)
    if rep.kernel_dim != 1:
        rep.generic = False
        rep.reason = "Levi kernel at the origin has dimension %d" % rep.kernel_dim
        return rep
    k = [ker[0][i] for i in range(n)]
    # cubic coefficient of bidegree (2,1) along the kernel direction
    cubic = zero
    tvec = [zero] * n
    for (a, b, j), v in phi.c.items():
        if j != 0 or sum(a) != 2 or sum(b) != 1:
            continue
        term = v
        for i, e in enumerate(a):
            for _ in range(e):
                term = term * k[i]
        for i, e in enumerate(b):
            for _ in range(e):
                term = term * k[i].conjugate()
        cubic = cubic + term
        for q in range(n):
            if a[q] == 0:
                continue
            t = v * ExactComplex(a[q]) if phi.exact else v * a[q]
            a2 = list(a)
            a2[q] -= 1
            for i, e in enumerate(a2):
                for _ in range(e):
                    t = t * k[i]
            for i, e in enumerate(b):
                for _ in range(e):
                    t = t * k[i].conjugate()
            tvec[q] = tvec[q] + t
    rep.cubic = cubic
    rep.tangency_vector = tvec
    if cubic.is_zero():
        rep.generic = False
        rep.reason = "degenerate cubic coefficient vanishes at the origin"
    else:
        rep.generic = True
        rep.reason = "rank-one Levi kernel with nonvanishing cubic"
    return rep


def check_generic_degeneracy(H):
    rep = invariants_at_origin(H)
    if not rep.generic:
        raise GenericityError(rep.reason)
    return rep


# ---------------------------------------------------------------------------
# preliminary adaptation (plain-degree grid, exact arithmetic)
# ---------------------------------------------------------------------------

def _norm_split(q):
    """Write a positive rational as a sum of two rational squares, returned
    as a Gaussian rational of that norm; None if impossible."""
    q = QQ(q)
    if q <= 0:
        return None
    num = int(q.numerator)
    den = int(q.denominator)
    target = num * den
    try:
        from sympy.solvers.diophantine.diophantine import power_representation

        reps = power_representation(target, 2, 2, zeros=True)
        x, y = next(iter(reps))
    except (StopIteration, ValueError):
        return None
    return ExactComplex(QQ(x) / den, QQ(y) / den)


def _linear_map(n, M, fz=None, g=None, exact=True):
    """Build a plain-degree MapJet from an n x n z-matrix and a g jet."""
    weights = unit_weights(n)
    one, _, _ = units_for(exact)
    zero = one - one
    comps = []
    for i in range(n):
        jet = HoloJet.zero(n, weights, M, exact)
        for j in range(n):
            v = fz[i][j] if fz is not None else (one if i == j else zero)
            if not s_is_zero(v):
                a = [0] * n
                a[j] = 1
                jet.set_coeff((tuple(a), 0), v)
        comps.append(jet)
    if g is None:
        g = HoloJet.var_w(n, weights, M, exact)
    return MapJet(comps, g)


def adapt_preliminary(H):
    """Normalize the two-jet at the origin: kill the linear part, put the
    Levi form in signature normal form with the kernel last, align the
    nondegenerate directions with the annihilator of the degenerate cubic,
    scale the cubic to one and the Levi eigenvalues to +-1, and remove low
    pure-holomorphic terms.  Works on the plain-degree grid and returns the
    simplified surface on the anisotropic grid, together with the total map
    (on the plain-degree grid) and the inferred signature r.

    Raises GenericityError if the origin is not a generic degeneracy point
    and ModeError if a required scaling is irrational.
    """
    if not H.exact:
        raise ModeError("exact adaptation requires exact coefficients")
    n = H.n
    M = H.M
    weights = unit_weights(n)
    if H.phi.weights != weights:
        raise StructuralError("adaptation expects a plain-degree graph jet")
    cur = H
    total = MapJet.identity(n, weights, M, True)
    steps = []

    def apply(F):
        nonlocal cur, total
        cur = push_forward_linear(cur, F)
        total = F.compose(total)
        steps.append(F)

    # --- tangent alignment -------------------------------------------
    for _ in range(3):
        cz = []
        for i in range(n):
            a = [0] * n
            a[i] = 1
            cz.append(cur.phi.coeff((tuple(a), (0,) * n, 0)))
        au = cur.phi.coeff(((0,) * n, (0,) * n, 1))
        if all(c.is_zero() for c in cz) and au.is_zero():
            break
        g = HoloJet.var_w(n, weights, M, True)
        if not all(c.is_zero() for c in cz):
            for i in range(n):
                if not cz[i].is_zero():
                    a = [0] * n
                    a[i] = 1
                    g.set_coeff((tuple(a), 0), cz[i] * (EC_I * ExactComplex(-2)))
            apply(_linear_map(n, M, g=g))
            continue
        if not au.is_real():
            raise ConsistencyError("graph function is not real")
        g = g.scale(EC_ONE - EC_I * au)
        apply(_linear_map(n, M, g=g))
    else:
        raise ConsistencyError("tangent alignment did not terminate")

    # --- Levi normal form at the origin -------------------------------
    rep = invariants_at_origin(cur)
    if rep.kernel_dim != 1:
        raise GenericityError(
            "Levi kernel at the origin has dimension %d, need 1" % rep.kernel_dim
        )
    r = rep.signature[0]
    if n > 1:
        T, diag = hermitian_congruence([row[:] for row in rep.levi_matrix])
        order = (
            [i for i, d in enumerate(diag) if d.re > 0]
            + [i for i, d in enumerate(diag) if d.re < 0]
            + [i for i, d in enumerate(diag) if d.is_zero()]
        )
        # under z' = S z the graph Levi form becomes (S^-1)^T H conj(S^-1),
        # so the diagonalizing substitution is S = conj(T)^-1
        Tp = [[T[i][order[j]].conjugate() for j in range(n)] for i in range(n)]
        apply(_linear_map(n, M, fz=invert_matrix(Tp)))
        # kernel is now the last coordinate; align the others with the
        # annihilator of the cubic tangency form
        rep = invariants_at_origin(cur)
        e = rep.cubic
        if e.is_zero():
            raise GenericityError("degenerate cubic coefficient vanishes")
        # beta_q = t_q / t_n with t_n = 2 e
        shear = [[EC_ONE if i == j else EC_ZERO for j in range(n)] for i in range(n)]
        for q in range(n - 1):
            shear[n - 1][q] = rep.tangency_vector[q] * (ExactComplex(2) * e).inverse()
        if any(not shear[n - 1][q].is_zero() for q in range(n - 1)):
            apply(_linear_map(n, M, fz=shear))

    # --- scale the degenerate cubic to one ----------------------------
    # The w-scale is determined by the cubic only up to a rational cube
    # t^3; choosing t = |d_1| (the first Levi pivot) aligns the norm class
    # of all pivots with that of d_1, so the eigenvalue scalings below are
    # rational whenever the pivots lie in a single class.
    rep = invariants_at_origin(cur)
    e = rep.cubic
    if e.is_zero():
        raise GenericityError("degenerate cubic coefficient vanishes")
    t = QQ(1)
    if n > 1:
        a1 = [0] * n
        a1[0] = 1
        d1 = cur.phi.coeff((tuple(a1), tuple(a1), 0))
        if not d1.is_real() or d1.is_zero():
            raise ConsistencyError("Levi pivot is not a nonzero real")
        t = abs(QQ(d1.re))
    mu = e.norm2() * t**3
    fz = [[EC_ONE if i == j else EC_ZERO for j in range(n)] for i in range(n)]
    fz[n - 1][n - 1] = e * ExactComplex(t)
    g = HoloJet.var_w(n, weights, M, True).scale(ExactComplex(mu))
    apply(_linear_map(n, M, fz=fz, g=g))

    # --- scale the Levi eigenvalues to +-1 ----------------------------
    if n > 1:
        fz = [[EC_ONE if i == j else EC_ZERO for j in range(n)] for i in range(n)]
        needed = False
        for j in range(n - 1):
            a = [0] * n
            a[j] = 1
            dj = cur.phi.coeff((tuple(a), tuple(a), 0))
            if not dj.is_real():
                raise ConsistencyError("Levi diagonal is not real")
            mj = abs(dj.re)
            if mj == 1:
                continue
            s = _norm_split(mj)
            if s is None:
                raise ModeError(
                    "Levi eigenvalue %s is not a sum of two rational squares"
                    % (mj,)
                )
            fz[j][j] = s
            needed = True
        if needed:
            apply(_linear_map(n, M, fz=fz))

    # --- kill pure-holomorphic terms of low degree --------------------
    wz, wu = surface_weights(n)
    for _ in range(2 * M):
        offenders = [
            (a, j)
            for (a, b, j), v in cur.phi.c.items()
            if sum(b) == 0
            and j == 0
            and sum(a) >= 1
            and sum(wz[i] * a[i] for i in range(n)) <= wu
        ]
        if not offenders:
            break
        a, j = min(offenders, key=lambda t: sum(t[0]))
        cv = cur.phi.coeff((a, (0,) * n, 0))
        g = HoloJet.var_w(n, weights, M, True)
        g.set_coeff((a, 0), cv * EC_I * ExactComplex(-2))
        apply(_linear_map(n, M, g=g))
    else:
        raise ConsistencyError("holomorphic-term removal did not terminate")

    # --- re-grade on the anisotropic grid and certify -----------------
    phi_w = cur.phi.with_weights(surface_weights(n), M)
    out = HypersurfaceJet(phi_w, r=r, level="simplified")
    if not out.is_simplified():
        raise ConsistencyError("adaptation failed to reach the simplified form")
    return out, total, r


# ---------------------------------------------------------------------------
# the Levi-degeneracy graph (n = 1)
# ---------------------------------------------------------------------------

@dataclass
class SigmaJet:
    """Sigma = {Re z = chi(Im z, u)} for a simplified surface with n = 1.

    chi and tau are jets in (y, u) on the anisotropic grid ([y]=1, [u]=3),
    stored as RealJet values over a single formal real variable in the
    z-slot; tau is the graph height v = Phi restricted to Sigma.
    """

    chi: object
    tau: object


def degeneracy_set_jet(H):
    if H.n != 1:
        raise DomainError("the degeneracy graph jet is implemented for n = 1")
    if not H.exact:
        raise ModeError("the degeneracy graph jet requires exact coefficients")
    lam = levi_determinant(H)
    M, weights, exact = H.phi.M, H.phi.weights, H.phi.exact
    a = lam.coeff(((1,), (0,), 0))
    if not a.is_real() or a.is_zero() or not lam.coeff(((0,), (1,), 0)) == a:
        raise GenericityError("Levi determinant is not transverse to Re z")
    one, iu, half = units_for(exact)
    Y = RealJet.var_z(1, weights, M, 0, exact)  # formal real variable y
    U = RealJet.var_u(1, weights, M, exact)
    inv2a = (a + a).inverse()
    chi = RealJet.zero(1, weights, M, exact)
    for _ in range(M + 1):
        X = chi + Y.scale(iu)
        Xb = chi - Y.scale(iu)
        val = subst_real(lam, [X], [Xb], U)
        new_chi = chi - val.scale(inv2a)
        if new_chi == chi:
            break
        chi = new_chi
    else:
        raise ConsistencyError("degeneracy-set solve did not converge")
    for v in chi.c.values():
        if exact and not v.is_real():
            raise ConsistencyError("degeneracy graph has non-real coefficients")
    X = chi + Y.scale(iu)
    Xb = chi - Y.scale(iu)
    resid = subst_real(lam, [X], [Xb], U)
    if exact and not resid.is_zero():
        raise ConsistencyError("degeneracy graph does not annihilate the Levi form")
    tau = subst_real(H.phi, [X], [Xb], U)
    return SigmaJet(chi=chi, tau=tau)
