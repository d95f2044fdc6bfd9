"""Holomorphic map jets (z, w) -> (f_1..f_n, g) and model frames."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConsistencyError, DomainError, StructuralError
from .linalg import invert_matrix
from .scalars import (
    EC_ONE,
    EC_ZERO,
    ExactComplex,
    QQ,
    is_rational,
    rational_root,
    s_is_zero,
    units_for,
)
from .series import HoloJet, surface_weights


class MapJet:
    __slots__ = ("n", "wz", "wu", "M", "exact", "fs", "g")

    def __init__(self, fs, g):
        self.fs = tuple(fs)
        self.g = g
        self.n = g.n
        self.wz, self.wu = g.wz, g.wu
        self.M = min([g.M] + [f.M for f in self.fs])
        self.exact = g.exact
        for f in self.fs:
            if (f.n, f.wz, f.wu, f.exact) != (self.n, self.wz, self.wu, self.exact):
                raise StructuralError("map component structure mismatch")
        if len(self.fs) != self.n:
            raise StructuralError("map needs n z-components")

    # ---- constructors ------------------------------------------------
    @staticmethod
    def identity(n, weights, M, exact=True):
        fs = [HoloJet.var_z(n, weights, M, i, exact) for i in range(n)]
        return MapJet(fs, HoloJet.var_w(n, weights, M, exact))

    @staticmethod
    def from_linear(A, n, weights, M, exact=True):
        """A is (n+1)x(n+1) over ExactComplex; variables ordered (z_1..z_n, w)."""
        comps = []
        for i in range(n + 1):
            jet = HoloJet.zero(n, weights, M, exact)
            for j in range(n):
                if not A[i][j].is_zero():
                    a = [0] * n
                    a[j] = 1
                    jet.set_coeff((tuple(a), 0), A[i][j])
            if not A[i][n].is_zero():
                jet.set_coeff(((0,) * n, 1), A[i][n])
            comps.append(jet)
        return MapJet(comps[:-1], comps[-1])

    def components(self):
        return list(self.fs) + [self.g]

    def truncate(self, M):
        return MapJet([f.truncate(M) for f in self.fs], self.g.truncate(M))

    def __eq__(self, other):
        if not isinstance(other, MapJet):
            return NotImplemented
        return self.fs == other.fs and self.g == other.g

    # ---- algebra -----------------------------------------------------
    def compose(self, other):
        """self after other."""
        zargs = list(other.fs)
        warg = other.g
        comps = [c.eval_holo(zargs, warg) for c in self.components()]
        return MapJet(comps[:-1], comps[-1])

    def linear_part(self):
        A = [[EC_ZERO] * (self.n + 1) for _ in range(self.n + 1)]
        one, _, _ = units_for(self.exact)
        for i, comp in enumerate(self.components()):
            for j in range(self.n):
                a = [0] * self.n
                a[j] = 1
                A[i][j] = comp.coeff((tuple(a), 0))
            A[i][self.n] = comp.coeff(((0,) * self.n, 1))
        return A

    def minus_linear(self):
        """Components with the plain-degree-1 and degree-0 part removed."""
        comps = []
        for comp in self.components():
            out = comp._like({})
            for (a, k), v in comp.c.items():
                if sum(a) + k >= 2:
                    out.c[(a, k)] = v
            comps.append(out)
        return comps

    def inverse(self):
        if not self.exact:
            raise DomainError("map inversion is exact-mode only")
        L = self.linear_part()
        Linv = invert_matrix(L)
        lin_inv = MapJet.from_linear(Linv, self.n, (self.wz, self.wu), self.M, self.exact)
        N = self.minus_linear()
        G = lin_inv
        idc = MapJet.identity(self.n, (self.wz, self.wu), self.M, self.exact).components()
        for _ in range(self.M + 3):
            NG = [c.eval_holo(list(G.fs), G.g) for c in N]
            comps = [i_ - ng for i_, ng in zip(idc, NG)]
            newG = MapJet(
                _apply_linear(Linv, comps)[:-1], _apply_linear(Linv, comps)[-1]
            )
            if newG == G:
                break
            G = newG
        chk = self.compose(G)
        ident = MapJet.identity(self.n, (self.wz, self.wu), self.M, self.exact)
        if not (chk == ident.truncate(chk.M)):
            raise ConsistencyError("map inversion failed verification")
        return G

    # ---- class predicates --------------------------------------------
    def is_weighted_positive(self):
        for i, f in enumerate(self.fs):
            mw = f.min_weight()
            if mw is not None and mw < self.wz[i]:
                return False
        mg = self.g.min_weight()
        if mg is not None and mg < self.wu:
            return False
        return True

    def is_normalized_class(self):
        """Weighted-lowest parts pinned: f_i = z_i + higher, g = w + higher."""
        for i, f in enumerate(self.fs):
            low = f.weighted_component(self.wz[i])
            want = HoloJet.var_z(self.n, (self.wz, self.wu), f.M, i, self.exact)
            if not (low == want.weighted_component(self.wz[i])):
                return False
            mw = f.min_weight()
            if mw is not None and mw < self.wz[i]:
                return False
        lowg = self.g.weighted_component(self.wu)
        wantg = HoloJet.var_w(self.n, (self.wz, self.wu), self.g.M, self.exact)
        if not (lowg == wantg.weighted_component(self.wu)):
            return False
        mg = self.g.min_weight()
        if mg is not None and mg < self.wu:
            return False
        return True


def _apply_linear(A, comps):
    out = []
    for i in range(len(comps)):
        acc = comps[0]._like({})
        for j, c in enumerate(comps):
            if not A[i][j].is_zero():
                acc = acc + c.scale(A[i][j])
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# model frames
# ---------------------------------------------------------------------------

def signature_eps(n, r):
    """eps^j for j=1..n-1: +1 for j<=r else -1."""
    return [1 if j < r else -1 for j in range(n - 1)]


@dataclass
class ModelFrame:
    n: int
    r: int
    lam: object  # rational, nonzero (positive for n>1)
    rho: int = 1
    C: object = None  # (n-1)x(n-1) ExactComplex matrix for n>1

    def __post_init__(self):
        if self.n == 1:
            if self.lam == 0:
                raise DomainError("frame dilation must be nonzero")
            self.rho = 1
            self.C = None
        else:
            if self.lam <= 0:
                raise DomainError("frame dilation must be positive for n>1")
            if self.rho not in (1, -1):
                raise DomainError("rho must be +1 or -1")
            if self.C is None:
                self.C = [
                    [EC_ONE if i == j else EC_ZERO for j in range(self.n - 1)]
                    for i in range(self.n - 1)
                ]
            eps = signature_eps(self.n, self.r)
            for p in range(self.n - 1):
                for q in range(self.n - 1):
                    s = EC_ZERO
                    for k in range(self.n - 1):
                        s = s + self.C[k][p].conjugate() * self.C[k][q] * eps[k]
                    want = ExactComplex(self.rho * eps[p]) if p == q else EC_ZERO
                    if not (s == want):
                        raise DomainError("frame matrix does not preserve the form")
            if self.rho == -1 and self.r != self.n - 1 - self.r:
                raise DomainError("rho=-1 needs a symmetric signature")

    def is_identity(self):
        if self.n == 1:
            return self.lam == 1
        if not (self.lam == 1 and self.rho == 1):
            return False
        for i in range(self.n - 1):
            for j in range(self.n - 1):
                want = EC_ONE if i == j else EC_ZERO
                if not (self.C[i][j] == want):
                    return False
        return True

    def to_map(self, M, exact=True):
        weights = surface_weights(self.n)
        n = self.n
        if n == 1:
            lam = QQ(self.lam)
            fs = [HoloJet.var_z(1, weights, M, 0, exact).scale(ExactComplex(lam))]
            g = HoloJet.var_w(1, weights, M, exact).scale(ExactComplex(lam**3))
            return MapJet(fs, g)
        lam = QQ(self.lam)
        A = [[EC_ZERO] * (n + 1) for _ in range(n + 1)]
        for i in range(n - 1):
            for j in range(n - 1):
                A[i][j] = self.C[i][j] * ExactComplex(lam**3)
        A[n - 1][n - 1] = ExactComplex(self.rho * lam**2)
        A[n][n] = ExactComplex(self.rho * lam**6)
        return MapJet.from_linear(A, n, weights, M, exact)


def rho_admissible(n, r):
    """Whether a frame with rho=-1 exists (signature symmetry)."""
    return n > 1 and r == n - 1 - r


def decompose_map(F):
    """Split F = Ftilde o Lambda with Lambda a model frame, Ftilde normalized."""
    n = F.n
    if n == 1:
        lam = F.fs[0].coeff(((1,), 0))
        if not lam.is_real() or lam.is_zero():
            raise DomainError("map is not frame-decomposable (z-coefficient)")
        frame = ModelFrame(1, 0, lam.re)
    else:
        gw = F.g.coeff(((0,) * n, 1))
        if not gw.is_real() or gw.is_zero():
            raise DomainError("map is not frame-decomposable (w-coefficient)")
        rho = 1 if gw.re > 0 else -1
        lam6 = abs(gw.re)
        lam = rational_root(lam6, 6)
        if lam is None:
            raise DomainError("frame dilation is irrational in exact mode")
        lam3 = lam**3
        C = []
        for i in range(n - 1):
            row = []
            for j in range(n - 1):
                a = [0] * n
                a[j] = 1
                row.append(F.fs[i].coeff((tuple(a), 0)) * ExactComplex(QQ(1) / lam3))
            C.append(row)
        frame = ModelFrame(n, _infer_r(F), lam, rho, C)
    lam_inv = frame_inverse(frame)
    Ft = F.compose(lam_inv.to_map(F.M, F.exact))
    if not Ft.is_normalized_class():
        raise DomainError("map does not decompose as frame o normalized")
    return frame, Ft


def _infer_r(F):
    # signature is not recoverable from the map alone; callers that care pass
    # their own frame.  We pick the r that validates, preferring the largest.
    n = F.n
    gw = F.g.coeff(((0,) * n, 1))
    rho = 1 if gw.re > 0 else -1
    lam6 = abs(gw.re)
    lam = rational_root(lam6, 6)
    lam3 = lam**3
    for r in range(n - 1, -1, -1):
        try:
            C = []
            for i in range(n - 1):
                row = []
                for j in range(n - 1):
                    a = [0] * n
                    a[j] = 1
                    row.append(
                        F.fs[i].coeff((tuple(a), 0)) * ExactComplex(QQ(1) / lam3)
                    )
                C.append(row)
            ModelFrame(n, r, lam, rho, C)
            return r
        except DomainError:
            continue
    raise DomainError("map linear part is not a model frame")


def frame_inverse(frame):
    if frame.n == 1:
        return ModelFrame(1, 0, QQ(1) / QQ(frame.lam))
    Cinv = invert_matrix(frame.C)
    lam_inv = QQ(1) / QQ(frame.lam)
    return ModelFrame(frame.n, frame.r, lam_inv, frame.rho, Cinv)
