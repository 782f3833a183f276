"""Exact linear algebra over the field of ScalarExpr values.

Matrices are lists of rows.  Entries may be anything ScalarExpr.coerce accepts.
"""

from __future__ import annotations

from typing import Sequence

from maequiv.symkernel import ONE, ZERO, GaussianRational, ScalarExpr

Matrix = list[list[ScalarExpr]]


class InconsistentSystem(ValueError):
    """The linear system has no solution; ``residual`` names the offending rows."""

    def __init__(self, message: str, residual: list | None = None):
        super().__init__(message)
        self.residual = residual or []


def as_matrix(rows: Sequence[Sequence]) -> Matrix:
    return [[ScalarExpr.coerce(v) for v in row] for row in rows]


def _rref_const(m: list[list[GaussianRational]]) -> list[int]:
    ncols = len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((k for k in range(r, len(m)) if m[k][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = m[r][c].inverse()
        m[r] = [v * inv for v in m[r]]
        for k in range(len(m)):
            if k != r and m[k][c]:
                f = m[k][c]
                m[k] = [a - f * b if b else a for a, b in zip(m[k], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return pivots


def rref(rows: Sequence[Sequence]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and pivot columns."""
    m = as_matrix(rows)
    if not m:
        return m, []
    consts = [[v.constant_value() for v in row] for row in m]
    if all(v is not None for row in consts for v in row):
        pivots = _rref_const(consts)
        return [[ScalarExpr.coerce(v) for v in row] for row in consts], pivots
    ncols = len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((k for k in range(r, len(m)) if not m[k][c].is_zero()), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = ONE / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for k in range(len(m)):
            if k != r and not m[k][c].is_zero():
                f = m[k][c]
                m[k] = [a - f * b for a, b in zip(m[k], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence], ncols: int | None = None) -> list[list[ScalarExpr]]:
    """Basis of the right kernel, one vector per free column."""
    if not rows:
        return [[ONE if k == j else ZERO for k in range(ncols or 0)] for j in range(ncols or 0)]
    m, pivots = rref(rows)
    n = len(m[0])
    basis = []
    for f in (c for c in range(n) if c not in pivots):
        v = [ZERO] * n
        v[f] = ONE
        for row, p in zip(m, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def solve(rows: Sequence[Sequence], rhs: Sequence) -> tuple[list[ScalarExpr], list[list[ScalarExpr]]]:
    """One particular solution of ``A x = b`` plus a kernel basis.

    Raises InconsistentSystem when no solution exists.
    """
    a = as_matrix(rows)
    b = [ScalarExpr.coerce(v) for v in rhs]
    n = len(a[0]) if a else 0
    aug = [row + [bv] for row, bv in zip(a, b)]
    m, pivots = rref(aug)
    if n in pivots:
        bad = [k for k, row in enumerate(m) if all(v.is_zero() for v in row[:n]) and not row[n].is_zero()]
        raise InconsistentSystem("linear system is inconsistent", [m[k][n] for k in bad])
    x = [ZERO] * n
    for row, p in zip(m, pivots):
        x[p] = row[n]
    return x, nullspace(a, n) if a else []


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> Matrix:
    a, b = as_matrix(a), as_matrix(b)
    return [[sum((a[i][k] * b[k][j] for k in range(len(b))), ZERO) for j in range(len(b[0]))]
            for i in range(len(a))]


def identity(n: int) -> Matrix:
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def inverse(a: Sequence[Sequence]) -> Matrix:
    a = as_matrix(a)
    n = len(a)
    m, pivots = rref([row + e for row, e in zip(a, identity(n))])
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in m]


def det(a: Sequence[Sequence]) -> ScalarExpr:
    m = as_matrix(a)
    n = len(m)
    d = ONE
    for c in range(n):
        piv = next((k for k in range(c, n) if not m[k][c].is_zero()), None)
        if piv is None:
            return ZERO
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            d = -d
        d = d * m[c][c]
        for k in range(c + 1, n):
            if not m[k][c].is_zero():
                f = m[k][c] / m[c][c]
                m[k] = [x - f * y for x, y in zip(m[k], m[c])]
    return d


def inertia(gram: Sequence[Sequence]) -> tuple[int, int, int]:
    """(positive, negative, zero) counts of a constant real symmetric matrix.

    Symmetric Gaussian elimination (congruence), pairing rows when the
    diagonal vanishes.
    """
    m = [[ScalarExpr.coerce(v).constant_value().re for v in row] for row in gram]
    n = len(m)
    pos = neg = 0
    active = list(range(n))
    while active:
        k = next((i for i in active if m[i][i] != 0), None)
        if k is None:
            pair = next(((i, j) for i in active for j in active if i < j and m[i][j] != 0), None)
            if pair is None:
                break
            i, j = pair
            # e_i <- e_i + e_j creates a nonzero diagonal entry
            for t in range(n):
                m[i][t] += m[j][t]
            for t in range(n):
                m[t][i] += m[t][j]
            continue
        pivot = m[k][k]
        if pivot > 0:
            pos += 1
        else:
            neg += 1
        active.remove(k)
        for i in active:
            f = m[i][k] / pivot
            if f:
                for t in range(n):
                    m[i][t] -= f * m[k][t]
                for t in range(n):
                    m[t][i] -= f * m[t][k]
    return pos, neg, n - pos - neg
