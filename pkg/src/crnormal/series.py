"""Truncated weighted power series (jets) in the two rings used throughout.

RealJet  - polynomials in (z_1..z_n, conj(z_1)..conj(z_n), u) with keys
           (a, b, j): z-exponents a, conjugate exponents b, u-exponent j.
HoloJet  - polynomials in (z_1..z_n, w) with keys (a, k).

Both are truncated by *weight*, not degree.  The two weight grids in use:

    surface case n=1: [z]=1, [u]=[w]=3
    surface case n>1: [z_1..z_{n-1}]=3, [z_n]=2, [u]=[w]=6

plus a unit grid (all weights 1) which makes the same classes act as plain
degree-truncated polynomial rings; that grid is used for raw inputs, for
degeneracy-set graphs and for the float machinery in `chains`.

Coefficients are ExactComplex in exact mode and Python complex in float
mode; no zero coefficient is ever stored.
"""
from __future__ import annotations

from .errors import DomainError, StructuralError
from .scalars import EC_ONE, ExactComplex, QQ, is_rational, sconj, s_is_zero, units_for


def weights_2d():
    return ((1,), 3)


def weights_nd(n):
    if n < 2:
        raise StructuralError("weights_nd needs n >= 2")
    return ((3,) * (n - 1) + (2,), 6)


def unit_weights(n):
    return ((1,) * n, 1)


def surface_weights(n):
    return weights_2d() if n == 1 else weights_nd(n)


def _coerce(scalar, exact):
    if exact:
        if isinstance(scalar, ExactComplex):
            return scalar
        if is_rational(scalar):
            return ExactComplex(scalar)
        raise TypeError(f"exact jet cannot hold {type(scalar).__name__}")
    return complex(scalar)


class _BaseJet:
    __slots__ = ("n", "wz", "wu", "M", "exact", "c")

    def __init__(self, n, weights, M, exact=True, coeffs=None):
        wz, wu = weights
        if len(wz) != n:
            raise StructuralError("weight vector length != n")
        self.n = n
        self.wz = tuple(wz)
        self.wu = wu
        self.M = M
        self.exact = exact
        self.c = {} if coeffs is None else coeffs

    # ---- structure ---------------------------------------------------
    @property
    def weights(self):
        return (self.wz, self.wu)

    def _compat(self, other):
        if (
            self.n != other.n
            or self.wz != other.wz
            or self.wu != other.wu
            or self.exact != other.exact
            or type(self) is not type(other)
        ):
            raise StructuralError("jet structure mismatch")

    def _like(self, coeffs=None, M=None):
        return type(self)(
            self.n, (self.wz, self.wu), self.M if M is None else M, self.exact, coeffs
        )

    def copy(self):
        return self._like(dict(self.c))

    def is_zero(self):
        return not self.c

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        if not isinstance(other, _BaseJet):
            return NotImplemented
        return (
            type(self) is type(other)
            and self.n == other.n
            and self.wz == other.wz
            and self.wu == other.wu
            and self.exact == other.exact
            and self.c == other.c
        )

    def __hash__(self):
        return hash((type(self), self.n, self.wz, self.wu, frozenset(self.c.items())))

    # ---- weights -----------------------------------------------------
    def key_weight(self, key):
        raise NotImplementedError

    def min_weight(self):
        return min((self.key_weight(k) for k in self.c), default=None)

    def max_weight(self):
        return max((self.key_weight(k) for k in self.c), default=None)

    def weighted_component(self, m):
        return self._like(
            {k: v for k, v in self.c.items() if self.key_weight(k) == m}
        )

    def truncate(self, M):
        return self._like(
            {k: v for k, v in self.c.items() if self.key_weight(k) <= M}, M=M
        )

    def weight_range(self, lo, hi):
        return self._like(
            {k: v for k, v in self.c.items() if lo <= self.key_weight(k) <= hi}
        )

    def with_weights(self, weights, M):
        """Re-grade the same coefficient data on a new weight grid.

        Keys whose new weight exceeds M are dropped.  Sound whenever the data
        was produced at a truncation order that dominates the new one (e.g.
        plain degree M data re-graded to weighted order M, since every
        variable has weight at least one).
        """
        out = type(self)(self.n, weights, M, self.exact)
        for k, v in self.c.items():
            if out.key_weight(k) <= M:
                out.c[k] = v
        return out

    # ---- ring ops ----------------------------------------------------
    def coeff(self, key):
        one, _, _ = units_for(self.exact)
        return self.c.get(key, one - one)

    def set_coeff(self, key, value):
        value = _coerce(value, self.exact)
        if s_is_zero(value):
            self.c.pop(key, None)
        else:
            self.c[key] = value

    def __add__(self, other):
        self._compat(other)
        M = min(self.M, other.M)
        out = dict(self.c)
        for k, v in other.c.items():
            s = out.get(k)
            s = v if s is None else s + v
            if s_is_zero(s):
                out.pop(k, None)
            else:
                out[k] = s
        if M < self.M or M < other.M:
            out = {k: v for k, v in out.items() if self.key_weight(k) <= M}
        return self._like(out, M=M)

    def __neg__(self):
        return self._like({k: -v for k, v in self.c.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, scalar):
        s = _coerce(scalar, self.exact)
        if s_is_zero(s):
            return self._like({})
        return self._like({k: v * s for k, v in self.c.items()})

    def __mul__(self, other):
        if isinstance(other, _BaseJet):
            self._compat(other)
            M = min(self.M, other.M)
            out = {}
            kw = self.key_weight
            terms2 = [(k2, v2, kw(k2)) for k2, v2 in other.c.items()]
            for k1, v1 in self.c.items():
                w1 = kw(k1)
                for k2, v2, w2 in terms2:
                    if w1 + w2 > M:
                        continue
                    k = self._key_mul(k1, k2)
                    p = v1 * v2
                    s = out.get(k)
                    s = p if s is None else s + p
                    if s_is_zero(s):
                        out.pop(k, None)
                    else:
                        out[k] = s
            return self._like(out, M=M)
        return self.scale(other)

    __rmul__ = __mul__

    def pow(self, e):
        if e < 0:
            raise DomainError("negative jet power")
        out = self.one_like()
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base if e > 1 else base
            e >>= 1
        return out

    def one_like(self):
        one, _, _ = units_for(self.exact)
        return self._like({self._unit_key(): one})

    def sorted_terms(self):
        """Deterministic graded-lex order: (weight, key)."""
        return sorted(self.c.items(), key=lambda kv: (self.key_weight(kv[0]), kv[0]))

    def support_weights(self):
        return sorted({self.key_weight(k) for k in self.c})


class RealJet(_BaseJet):
    """Jet in (z, conj z, u); keys (a, b, j) with tuples a, b of length n."""

    def key_weight(self, key):
        a, b, j = key
        wz = self.wz
        return sum(wz[i] * (a[i] + b[i]) for i in range(self.n)) + self.wu * j

    @staticmethod
    def _key_mul(k1, k2):
        a1, b1, j1 = k1
        a2, b2, j2 = k2
        return (
            tuple(x + y for x, y in zip(a1, a2)),
            tuple(x + y for x, y in zip(b1, b2)),
            j1 + j2,
        )

    def _unit_key(self):
        z = (0,) * self.n
        return (z, z, 0)

    # ---- constructors ------------------------------------------------
    @classmethod
    def zero(cls, n, weights, M, exact=True):
        return cls(n, weights, M, exact)

    @classmethod
    def monomial(cls, n, weights, M, a, b, j, coeff=1, exact=True):
        out = cls(n, weights, M, exact)
        out.set_coeff((tuple(a), tuple(b), j), coeff)
        return out

    @classmethod
    def var_z(cls, n, weights, M, i, exact=True):
        a = [0] * n
        a[i] = 1
        return cls.monomial(n, weights, M, a, [0] * n, 0, 1, exact)

    @classmethod
    def var_zbar(cls, n, weights, M, i, exact=True):
        b = [0] * n
        b[i] = 1
        return cls.monomial(n, weights, M, [0] * n, b, 0, 1, exact)

    @classmethod
    def var_u(cls, n, weights, M, exact=True):
        return cls.monomial(n, weights, M, [0] * n, [0] * n, 1, 1, exact)

    # ---- conjugation-aware ops ----------------------------------------
    def conjugate(self):
        return self._like({(b, a, j): sconj(v) for (a, b, j), v in self.c.items()})

    def re_part(self):
        _, _, half = units_for(self.exact)
        return (self + self.conjugate()).scale(half)

    def im_part(self):
        _, i_, half = units_for(self.exact)
        return (self - self.conjugate()).scale(half * (-1) * i_)

    def is_real(self, tol=None):
        for (a, b, j), v in self.c.items():
            w = self.c.get((b, a, j))
            if w is None:
                bad = v
            else:
                bad = v - sconj(w)
            if tol is None:
                if not s_is_zero(bad):
                    return False
            else:
                if abs(complex(bad)) > tol:
                    return False
        return True

    # ---- calculus ----------------------------------------------------
    def diff_z(self, i):
        out = {}
        for (a, b, j), v in self.c.items():
            if a[i]:
                na = list(a)
                na[i] -= 1
                out[(tuple(na), b, j)] = v * a[i]
        return self._like(out)

    def diff_zbar(self, i):
        out = {}
        for (a, b, j), v in self.c.items():
            if b[i]:
                nb = list(b)
                nb[i] -= 1
                out[(a, tuple(nb), j)] = v * b[i]
        return self._like(out)

    def diff_u(self):
        out = {}
        for (a, b, j), v in self.c.items():
            if j:
                out[(a, b, j - 1)] = v * j
        return self._like(out)

    def integrate_u(self):
        """u-antiderivative vanishing at u=0.  Weight grows by [u]."""
        out = {}
        for (a, b, j), v in self.c.items():
            k = (a, b, j + 1)
            if self.key_weight(k) <= self.M:
                out[k] = v * (QQ(1, j + 1) if self.exact else 1.0 / (j + 1))
        return self._like(out)

    def trace(self, r):
        """sum_j eps^j d^2/dz_j dzbar_j over j=1..n-1, eps^j=+1 for j<=r."""
        if self.n < 2:
            raise StructuralError("trace needs n >= 2")
        out = self._like({})
        for i in range(self.n - 1):
            eps = 1 if i < r else -1
            term = self.diff_z(i).diff_zbar(i)
            out = out + (term if eps == 1 else -term)
        return out

    # ---- substitution -------------------------------------------------
    def subst_z0(self):
        """Coefficients of the restriction z=0: dict j -> scalar."""
        zero = (0,) * self.n
        return {j: v for (a, b, j), v in self.c.items() if a == zero and b == zero}

    def u_series(self):
        """Restriction to z=0 as a jet in u only."""
        zero = (0,) * self.n
        return self._like(
            {k: v for k, v in self.c.items() if k[0] == zero and k[1] == zero}
        )

    def eval_float(self, zvals, uval):
        tot = 0j
        for (a, b, j), v in self.c.items():
            t = complex(v) if not self.exact else v.to_complex()
            for i, e in enumerate(a):
                if e:
                    t *= zvals[i] ** e
            for i, e in enumerate(b):
                if e:
                    t *= zvals[i].conjugate() ** e
            if j:
                t *= uval**j
            tot += t
        return tot


class HoloJet(_BaseJet):
    """Jet in (z, w); keys (a, k)."""

    def key_weight(self, key):
        a, k = key
        wz = self.wz
        return sum(wz[i] * a[i] for i in range(self.n)) + self.wu * k

    @staticmethod
    def _key_mul(k1, k2):
        a1, j1 = k1
        a2, j2 = k2
        return (tuple(x + y for x, y in zip(a1, a2)), j1 + j2)

    def _unit_key(self):
        return ((0,) * self.n, 0)

    @classmethod
    def zero(cls, n, weights, M, exact=True):
        return cls(n, weights, M, exact)

    @classmethod
    def monomial(cls, n, weights, M, a, k, coeff=1, exact=True):
        out = cls(n, weights, M, exact)
        out.set_coeff((tuple(a), k), coeff)
        return out

    @classmethod
    def var_z(cls, n, weights, M, i, exact=True):
        a = [0] * n
        a[i] = 1
        return cls.monomial(n, weights, M, a, 0, 1, exact)

    @classmethod
    def var_w(cls, n, weights, M, exact=True):
        return cls.monomial(n, weights, M, [0] * n, 1, 1, exact)

    # ---- calculus ----------------------------------------------------
    def diff_z(self, i):
        out = {}
        for (a, k), v in self.c.items():
            if a[i]:
                na = list(a)
                na[i] -= 1
                out[(tuple(na), k)] = v * a[i]
        return self._like(out)

    def diff_w(self):
        out = {}
        for (a, k), v in self.c.items():
            if k:
                out[(a, k - 1)] = v * k
        return self._like(out)

    # ---- substitutions ------------------------------------------------
    def restrict_to_graph(self, phi):
        """Value on w = u + i*phi(z, conj z, u), as a RealJet.

        phi must have positive minimal weight (no constant term).
        """
        if phi.n != self.n or phi.wz != self.wz or phi.wu != self.wu:
            raise StructuralError("graph function structure mismatch")
        mw = phi.min_weight()
        if mw is not None and mw <= 0:
            raise DomainError("graph function must vanish at 0")
        M = min(self.M, phi.M)
        _, i_, _ = units_for(self.exact)
        W = RealJet.var_u(self.n, (self.wz, self.wu), M, self.exact) + phi.truncate(
            M
        ).scale(i_)
        # Horner in the w-exponent.
        kmax = max((k for (_, k) in self.c), default=0)
        acc = RealJet.zero(self.n, (self.wz, self.wu), M, self.exact)
        zero = (0,) * self.n
        for k in range(kmax, -1, -1):
            layer = RealJet(
                self.n,
                (self.wz, self.wu),
                M,
                self.exact,
                {(a, zero, 0): v for (a, kk), v in self.c.items() if kk == k},
            )
            acc = acc * W + layer
        return acc

    def eval_holo(self, zargs, warg):
        """Composition: substitute z_i -> zargs[i], w -> warg (HoloJets)."""
        M = min([self.M, warg.M] + [z.M for z in zargs])
        out = HoloJet.zero(zargs[0].n if zargs else warg.n, warg.weights, M, self.exact)
        cache = {}

        def power(base_idx, base, e):
            key = (base_idx, e)
            got = cache.get(key)
            if got is None:
                got = base.pow(e)
                cache[key] = got
            return got

        for (a, k), v in self.c.items():
            term = out.one_like().scale(v)
            for i, e in enumerate(a):
                if e:
                    term = term * power(i, zargs[i], e)
            if k:
                term = term * power("w", warg, k)
            out = out + term
        return out

    def eval_float(self, zvals, wval):
        tot = 0j
        for (a, k), v in self.c.items():
            t = complex(v) if not self.exact else v.to_complex()
            for i, e in enumerate(a):
                if e:
                    t *= zvals[i] ** e
            if k:
                t *= wval**k
            tot += t
        return tot

    def as_real(self):
        """Embed a z-only polynomial (no w) into the real ring."""
        zero = (0,) * self.n
        out = {}
        for (a, k), v in self.c.items():
            if k:
                raise DomainError("as_real needs a w-free jet")
            out[(a, zero, 0)] = v
        return RealJet(self.n, (self.wz, self.wu), self.M, self.exact, out)


# ---------------------------------------------------------------------------
# generic substitution into a RealJet
# ---------------------------------------------------------------------------

def subst_real(phi, Zs, Zbars, U):
    """phi(z, conj z, u) with z_i -> Zs[i], conj(z_i) -> Zbars[i], u -> U.

    All images are RealJets on a common grid; each must have positive
    minimal weight so the substitution terminates under truncation.
    """
    ref = U
    M = min([phi.M, U.M] + [x.M for x in Zs] + [x.M for x in Zbars])
    out = RealJet.zero(ref.n, ref.weights, M, ref.exact)
    for jet in list(Zs) + list(Zbars) + [U]:
        mw = jet.min_weight()
        if mw is not None and mw <= 0:
            raise DomainError("substitution image must vanish at 0")
    cache = {}

    def power(tag, base, e):
        got = cache.get((tag, e))
        if got is None:
            prev = power(tag, base, e - 1) if e > 1 else base.one_like()
            got = prev * base
            cache[(tag, e)] = got
        return got

    prod_cache = {}

    def monomial_image(a, b):
        got = prod_cache.get((a, b))
        if got is None:
            got = None
            for i, e in enumerate(a):
                if e:
                    p = power(("z", i), Zs[i], e)
                    got = p if got is None else got * p
            for i, e in enumerate(b):
                if e:
                    p = power(("zb", i), Zbars[i], e)
                    got = p if got is None else got * p
            if got is None:
                got = out.one_like()
            prod_cache[(a, b)] = got
        return got

    for (a, b, j), v in sorted(phi.c.items()):
        term = monomial_image(a, b).scale(v)
        if j:
            term = term * power("u", U, j)
        out = out + term
    return out


# ---------------------------------------------------------------------------
# analytic functions of a jet
# ---------------------------------------------------------------------------

def apply_power_series(coeffs, x):
    """sum coeffs[k] * x^k for a jet x of positive minimal weight."""
    mw = x.min_weight()
    if mw is not None and mw <= 0:
        raise DomainError("series argument must vanish at 0")
    out = x._like({})
    one = x.one_like()
    powx = one
    step = max(mw or (x.M + 1), 1)
    kmax = min(len(coeffs) - 1, x.M // step if x else 0)
    for k in range(kmax + 1):
        if k:
            powx = powx * x
        ck = coeffs[k]
        if not s_is_zero(_coerce(ck, x.exact) if x.exact else complex(ck)):
            out = out + powx.scale(ck)
    return out


def _unit_split(a):
    """Split a = c0 * (1 + x); returns (c0, x) with x vanishing at 0."""
    key = a._unit_key()
    c0 = a.c.get(key)
    if c0 is None or s_is_zero(c0):
        raise DomainError("jet must have nonzero constant term")
    x = a.scale(1 / c0 if not a.exact else c0.inverse())
    x = x - x.one_like()
    return c0, x


def jet_log(a):
    """log(a) for a jet with constant term 1."""
    c0, x = _unit_split(a)
    if a.exact:
        if not (c0 == EC_ONE):
            raise DomainError("jet_log needs constant term 1")
    else:
        if abs(c0 - 1.0) > 1e-12:
            raise DomainError("jet_log needs constant term 1")
    kmax = a.M
    if a.exact:
        coeffs = [QQ(0)] + [QQ((-1) ** (k + 1), k) for k in range(1, kmax + 1)]
    else:
        coeffs = [0.0] + [((-1) ** (k + 1)) / k for k in range(1, kmax + 1)]
    return apply_power_series(coeffs, x)


def jet_exp(a):
    """exp(a) for a jet with zero constant term."""
    key = a._unit_key()
    if key in a.c:
        raise DomainError("jet_exp needs zero constant term")
    kmax = a.M
    if a.exact:
        coeffs = []
        f = QQ(1)
        for k in range(kmax + 1):
            if k:
                f = f / k
            coeffs.append(f)
    else:
        import math

        coeffs = [1.0 / math.factorial(k) for k in range(kmax + 1)]
    return apply_power_series(coeffs, a)


def jet_pow(a, p, q=1):
    """a^(p/q) via the binomial series; needs constant term 1."""
    c0, x = _unit_split(a)
    ok = (c0 == EC_ONE) if a.exact else abs(c0 - 1.0) < 1e-12
    if not ok:
        raise DomainError("jet_pow needs constant term 1")
    alpha = QQ(p, q) if a.exact else p / q
    coeffs = []
    cur = QQ(1) if a.exact else 1.0
    for k in range(a.M + 1):
        coeffs.append(cur)
        fac = (alpha - k) / (k + 1)
        cur = cur * fac
    return apply_power_series(coeffs, x)


def formal_inverse_functions(a, kind):
    """log / exp / sqrt / cbrt / pow:p/q of a jet with normalized constant."""
    if kind == "log":
        return jet_log(a)
    if kind == "exp":
        return jet_exp(a)
    if kind == "sqrt":
        return jet_pow(a, 1, 2)
    if kind == "cbrt":
        return jet_pow(a, 1, 3)
    if kind.startswith("pow:"):
        frac = kind.split(":", 1)[1]
        if "/" in frac:
            p, q = frac.split("/")
        else:
            p, q = frac, "1"
        return jet_pow(a, int(p), int(q))
    raise DomainError(f"unknown formal function {kind!r}")


# ---------------------------------------------------------------------------
# monomial enumeration (used by solvers, random generators, printers)
# ---------------------------------------------------------------------------

def _exponent_vectors(weights, total):
    """All tuples e with sum e_i*weights_i == total."""
    if not weights:
        if total == 0:
            yield ()
        return
    w0 = weights[0]
    for e0 in range(total // w0 + 1):
        for rest in _exponent_vectors(weights[1:], total - e0 * w0):
            yield (e0,) + rest


def real_monomials_of_weight(n, weights, m):
    wz, wu = weights
    out = []
    for j in range(m // wu + 1):
        rem = m - wu * j
        for ab in _exponent_vectors(wz + wz, rem):
            out.append((ab[:n], ab[n:], j))
    return sorted(out)


def holo_monomials_of_weight(n, weights, m):
    wz, wu = weights
    out = []
    for k in range(m // wu + 1):
        rem = m - wu * k
        for a in _exponent_vectors(wz, rem):
            out.append((a, k))
    return sorted(out)
