"""Exact linear algebra over ExactComplex (small dense systems only)."""
from __future__ import annotations

from .errors import ConsistencyError, DomainError
from .scalars import EC_ONE, EC_ZERO, ExactComplex, QQ


def _zeros(rows, cols):
    return [[EC_ZERO for _ in range(cols)] for _ in range(rows)]


def identity(nn):
    out = _zeros(nn, nn)
    for i in range(nn):
        out[i][i] = EC_ONE
    return out


def mat_mul(A, B):
    rows, inner, cols = len(A), len(B), len(B[0])
    out = _zeros(rows, cols)
    for i in range(rows):
        Ai = A[i]
        for k in range(inner):
            a = Ai[k]
            if a.is_zero():
                continue
            Bk = B[k]
            row = out[i]
            for j in range(cols):
                if not Bk[j].is_zero():
                    row[j] = row[j] + a * Bk[j]
    return out


def mat_vec(A, x):
    out = []
    for row in A:
        s = EC_ZERO
        for a, b in zip(row, x):
            if not a.is_zero() and not b.is_zero():
                s = s + a * b
        out.append(s)
    return out


def conj_transpose(A):
    rows, cols = len(A), len(A[0])
    return [[A[i][j].conjugate() for i in range(rows)] for j in range(cols)]


class ExactLU:
    """Row-echelon factorization of a (possibly rectangular) matrix,
    reusable for many right-hand sides.  Requires full column rank."""

    def __init__(self, A):
        rows = [list(r) for r in A]
        self.nrows = len(rows)
        self.ncols = len(rows[0]) if rows else 0
        self.ops = []  # (kind, ...) replayed on each rhs
        self.pivots = []  # (row, col) in elimination order
        r = 0
        for col in range(self.ncols):
            piv = None
            for i in range(r, self.nrows):
                if not rows[i][col].is_zero():
                    piv = i
                    break
            if piv is None:
                raise ConsistencyError("matrix does not have full column rank")
            if piv != r:
                rows[r], rows[piv] = rows[piv], rows[r]
                self.ops.append(("swap", r, piv))
            inv = rows[r][col].inverse()
            for i in range(r + 1, self.nrows):
                f = rows[i][col]
                if f.is_zero():
                    continue
                f = f * inv
                self.ops.append(("sub", i, r, f))
                rowi, rowr = rows[i], rows[r]
                for j in range(col, self.ncols):
                    rowi[j] = rowi[j] - f * rowr[j]
            self.pivots.append((r, col))
            r += 1
        self.U = rows
        self.rank = len(self.pivots)

    def solve(self, b):
        b = list(b)
        for op in self.ops:
            if op[0] == "swap":
                _, i, j = op
                b[i], b[j] = b[j], b[i]
            else:
                _, i, r, f = op
                b[i] = b[i] - f * b[r]
        x = [EC_ZERO] * self.ncols
        for r, col in reversed(self.pivots):
            s = b[r]
            row = self.U[r]
            for j in range(col + 1, self.ncols):
                if not row[j].is_zero() and not x[j].is_zero():
                    s = s - row[j] * x[j]
            x[col] = s * row[col].inverse()
        # consistency of the extra rows
        nr = len(self.pivots)
        for i in range(nr, self.nrows):
            if not b[i].is_zero():
                raise ConsistencyError("inconsistent linear system")
        return x


def solve_exact(A, b):
    return ExactLU(A).solve(b)


def kernel_exact(A):
    """Basis of the nullspace of A (list of ExactComplex vectors)."""
    rows = [list(r) for r in A]
    nrows = len(rows)
    ncols = len(rows[0]) if rows else 0
    pivots = []
    r = 0
    for col in range(ncols):
        piv = None
        for i in range(r, nrows):
            if not rows[i][col].is_zero():
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = rows[r][col].inverse()
        rows[r] = [x * inv for x in rows[r]]
        for i in range(nrows):
            if i != r and not rows[i][col].is_zero():
                f = rows[i][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
        if r == nrows:
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [EC_ZERO] * ncols
        v[fc] = EC_ONE
        for pr, pc in enumerate(pivots):
            v[pc] = -rows[pr][fc]
        basis.append(v)
    return basis


def invert_matrix(A):
    nn = len(A)
    lu = ExactLU(A)
    cols = []
    for j in range(nn):
        e = [EC_ONE if i == j else EC_ZERO for i in range(nn)]
        cols.append(lu.solve(e))
    return [[cols[j][i] for j in range(nn)] for i in range(nn)]


def det_exact(A):
    rows = [list(r) for r in A]
    nn = len(rows)
    det = EC_ONE
    for col in range(nn):
        piv = None
        for i in range(col, nn):
            if not rows[i][col].is_zero():
                piv = i
                break
        if piv is None:
            return EC_ZERO
        if piv != col:
            rows[col], rows[piv] = rows[piv], rows[col]
            det = -det
        det = det * rows[col][col]
        inv = rows[col][col].inverse()
        for i in range(col + 1, nn):
            f = rows[i][col] * inv
            if not f.is_zero():
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[col])]
    return det


def hermitian_congruence(H):
    """T, d with T* H T = diag(d); H Hermitian over ExactComplex.

    Diagonal entries of d are real rationals (as ExactComplex); zero
    entries are sorted last by the caller if needed.
    """
    nn = len(H)
    H = [list(r) for r in H]
    T = identity(nn)

    def apply_col(op):
        # column operation on H together with its conjugate row op,
        # and the same column op on T.
        kind = op[0]
        if kind == "swap":
            _, i, j = op
            for M in (H,):
                for row in M:
                    row[i], row[j] = row[j], row[i]
                M[i], M[j] = M[j], M[i]
            for row in T:
                row[i], row[j] = row[j], row[i]
        else:
            _, i, j, f = op  # col_i += f * col_j
            for row in H:
                row[i] = row[i] + f * row[j]
            H[i] = [x + f.conjugate() * y for x, y in zip(H[i], H[j])]
            for row in T:
                row[i] = row[i] + f * row[j]

    for k in range(nn):
        if H[k][k].is_zero():
            # find a later nonzero diagonal, else synthesize one
            found = None
            for i in range(k + 1, nn):
                if not H[i][i].is_zero():
                    found = i
                    break
            if found is not None:
                apply_col(("swap", k, found))
            else:
                off = None
                for i in range(k, nn):
                    for j in range(i + 1, nn):
                        if not H[i][j].is_zero():
                            off = (i, j)
                            break
                    if off:
                        break
                if off is None:
                    break  # remaining block is zero
                i, j = off
                if i != k:
                    apply_col(("swap", k, i))
                    i, j = k, (i if j == k else j)
                # make H[k][k] nonzero: col_k += f*col_j with f chosen so
                # 2*Re(f*H[k][j]) != 0
                f = EC_ONE if not (H[k][j] + H[j][k]).is_zero() else ExactComplex(0, 1)
                apply_col(("add", k, j, f))
                if H[k][k].is_zero():
                    raise ConsistencyError("congruence pivot synthesis failed")
        if H[k][k].is_zero():
            continue
        inv = H[k][k].inverse()
        for j in range(k + 1, nn):
            f = -(H[k][j] * inv)
            if not f.is_zero():
                apply_col(("add", j, k, f))
    d = [H[i][i] for i in range(nn)]
    for x in d:
        if not x.is_real():
            raise ConsistencyError("congruence diagonal not real")
    return T, d
