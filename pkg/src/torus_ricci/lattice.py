"""Exact integer linear algebra: Smith normal form, integer kernels, preimages.

Matrices are plain tuples of tuples of Python ints so every operation stays
exact. Rational results use :class:`fractions.Fraction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from itertools import combinations
from typing import Sequence

IntMatrix = tuple[tuple[int, ...], ...]
IntVector = tuple[int, ...]


class LatticeError(ValueError):
    """Raised for inconsistent or degenerate lattice input."""


def as_matrix(rows: Sequence[Sequence[int]]) -> IntMatrix:
    mat = tuple(tuple(int(v) for v in row) for row in rows)
    if not mat or not mat[0]:
        raise LatticeError("matrix must have at least one row and one column")
    width = len(mat[0])
    if any(len(row) != width for row in mat):
        raise LatticeError("ragged matrix")
    return mat


def identity(n: int) -> IntMatrix:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def shape(a: IntMatrix) -> tuple[int, int]:
    return len(a), len(a[0])


def transpose(a: IntMatrix) -> IntMatrix:
    return tuple(zip(*a))


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> tuple:
    bt = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in bt) for row in a)


def matvec(a: Sequence[Sequence], v: Sequence) -> tuple:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def det(a: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    m = [list(row) for row in a]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1] if n else 1


def minors(a: IntMatrix, k: int) -> list[int]:
    """All k x k minors of ``a``."""
    n, m = shape(a)
    out = []
    for rows in combinations(range(n), k):
        for cols in combinations(range(m), k):
            out.append(det([[a[i][j] for j in cols] for i in rows]))
    return out


@dataclass(frozen=True)
class SnfDecomposition:
    """``U @ A @ V == S`` with ``U``, ``V`` unimodular and ``S`` diagonal."""

    U: IntMatrix
    S: IntMatrix
    V: IntMatrix
    invariant_factors: tuple[int, ...]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.invariant_factors if d != 0)


def smith_normal_form(a: Sequence[Sequence[int]]) -> SnfDecomposition:
    """Smith normal form with the unimodular transforms.

    Works by repeated Euclidean reduction on the smallest nonzero pivot; the
    returned diagonal is non-negative and satisfies the divisibility chain.
    """
    A = as_matrix(a)
    n, m = shape(A)
    S = [list(row) for row in A]
    U = [list(row) for row in identity(n)]
    V = [list(row) for row in identity(m)]

    def swap_rows(i, j):
        S[i], S[j] = S[j], S[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for M in (S, V):
            for row in M:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row_dst += q * row_src
        for M in (S, U):
            M[dst] = [x + q * y for x, y in zip(M[dst], M[src])]

    def add_col(dst, src, q):  # col_dst += q * col_src
        for M in (S, V):
            for row in M:
                row[dst] += q * row[src]

    for t in range(min(n, m)):
        while True:
            pivots = [(abs(S[i][j]), i, j) for i in range(t, n) for j in range(t, m) if S[i][j]]
            if not pivots:
                break
            _, pi, pj = min(pivots)
            swap_rows(t, pi)
            swap_cols(t, pj)
            done = True
            for i in range(t + 1, n):
                q = S[i][t] // S[t][t]
                if q:
                    add_row(i, t, -q)
                if S[i][t]:
                    done = False
            for j in range(t + 1, m):
                q = S[t][j] // S[t][t]
                if q:
                    add_col(j, t, -q)
                if S[t][j]:
                    done = False
            if not done:
                continue
            # pivot must divide the remaining block
            bad = next(
                (i for i in range(t + 1, n) for j in range(t + 1, m) if S[i][j] % S[t][t]),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, 1)
        if t < n and t < m and S[t][t] < 0:
            S[t] = [-x for x in S[t]]
            U[t] = [-x for x in U[t]]

    factors = tuple(S[i][i] for i in range(min(n, m)))
    return SnfDecomposition(
        U=as_matrix(U), S=as_matrix(S), V=as_matrix(V), invariant_factors=factors
    )


def determinantal_factors(a: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Invariant factors from gcds of k x k minors (slow, independent route)."""
    A = as_matrix(a)
    n, m = shape(A)
    divisors = [1]
    for k in range(1, min(n, m) + 1):
        divisors.append(reduce(math.gcd, (abs(x) for x in minors(A, k)), 0))
    out = []
    for k in range(1, min(n, m) + 1):
        out.append(divisors[k] // divisors[k - 1] if divisors[k - 1] else 0)
    return tuple(out)


def _echelon_rows(rows: list[list[int]]) -> list[list[int]]:
    """Integer row echelon form (Hermite style) of a lattice basis."""
    rows = [list(r) for r in rows]
    if not rows:
        return rows
    width = len(rows[0])
    r = 0
    for c in range(width):
        while True:
            nz = [i for i in range(r, len(rows)) if rows[i][c]]
            if not nz:
                break
            p = min(nz, key=lambda i: abs(rows[i][c]))
            rows[r], rows[p] = rows[p], rows[r]
            clean = True
            for i in range(r + 1, len(rows)):
                q = rows[i][c] // rows[r][c]
                rows[i] = [x - q * y for x, y in zip(rows[i], rows[r])]
                if rows[i][c]:
                    clean = False
            if clean:
                break
        if r < len(rows) and rows[r][c]:
            if rows[r][c] < 0:
                rows[r] = [-x for x in rows[r]]
            for i in range(r):
                q = rows[i][c] // rows[r][c]
                rows[i] = [x - q * y for x, y in zip(rows[i], rows[r])]
            r += 1
        if r == len(rows):
            break
    return [row for row in rows if any(row)]


def hermite_rows(rows: Sequence[Sequence[int]]) -> tuple[IntVector, ...]:
    """Canonical basis of the lattice spanned by ``rows``."""
    return tuple(tuple(r) for r in _echelon_rows([list(r) for r in rows]))


def saturate(rows: Sequence[Sequence[int]]) -> tuple[IntVector, ...]:
    """Z-basis of (span_Q rows) intersected with Z^m, in canonical form."""
    rows = [list(r) for r in rows if any(r)]
    if not rows:
        return ()
    # the saturation is the annihilator of the annihilator
    k = integer_kernel(rows).integer_kernel_basis
    if not k:
        return hermite_rows(identity(len(rows[0])))
    return integer_kernel(k).integer_kernel_basis


@dataclass(frozen=True)
class KernelLattice:
    """Real kernel K and integer kernel F of an integer matrix."""

    real_kernel_basis: tuple[tuple[Fraction, ...], ...]
    integer_kernel_basis: tuple[IntVector, ...]

    @property
    def rank(self) -> int:
        return len(self.integer_kernel_basis)


def integer_kernel(a: Sequence[Sequence[int]]) -> KernelLattice:
    """Saturated Z-basis of ker(A) in Z^m, plus the same vectors over Q."""
    A = as_matrix(a)
    snf = smith_normal_form(A)
    _, m = shape(A)
    basis = [[snf.V[i][j] for i in range(m)] for j in range(snf.rank, m)]
    basis = [tuple(r) for r in _echelon_rows(basis)]
    real = tuple(tuple(Fraction(x) for x in v) for v in basis)
    return KernelLattice(real_kernel_basis=real, integer_kernel_basis=tuple(basis))


def is_primitive(a: Sequence[int]) -> bool:
    if not any(a):
        raise LatticeError("zero vector does not define a circle subgroup")
    return reduce(math.gcd, (abs(int(x)) for x in a), 0) == 1


def minor_gcd(a: Sequence[int], b: Sequence[int]) -> int:
    """gcd of all 2 x 2 minors of the n x 2 matrix [a b]."""
    vals = [a[i] * b[j] - a[j] * b[i] for i, j in combinations(range(len(a)), 2)]
    return reduce(math.gcd, (abs(v) for v in vals), 0)


def legality_pair(a: Sequence[int], b: Sequence[int]) -> bool:
    """True iff the circles G(a), G(b) intersect trivially."""
    if len(a) != len(b):
        raise LatticeError("weights of different rank")
    if not (is_primitive(a) and is_primitive(b)):
        raise LatticeError(f"non-primitive weight in pair {tuple(a)}, {tuple(b)}")
    g = minor_gcd(a, b)
    if g == 0:
        raise LatticeError(f"dependent weights {tuple(a)}, {tuple(b)}")
    return g == 1


def solve_preimage(a: Sequence[Sequence[int]], y: Sequence[int]) -> tuple[Fraction, ...]:
    """A solution ``w`` of ``A w = y``; integral whenever one exists.

    Uses ``S z = U y`` and ``w = V z`` with the free coordinates of ``z`` set
    to zero.
    """
    A = as_matrix(a)
    n, m = shape(A)
    if len(y) != n:
        raise LatticeError("right-hand side has wrong length")
    snf = smith_normal_form(A)
    uy = matvec(snf.U, [int(v) for v in y])
    z = [Fraction(0)] * m
    for i in range(n):
        d = snf.invariant_factors[i] if i < min(n, m) else 0
        if d == 0:
            if uy[i] != 0:
                raise LatticeError("inconsistent system: y not in the column span")
        else:
            z[i] = Fraction(uy[i], d)
    return tuple(sum((snf.V[i][j] * z[j] for j in range(m)), Fraction(0)) for i in range(m))


def same_lattice(rows_a: Sequence[Sequence[int]], rows_b: Sequence[Sequence[int]]) -> bool:
    return hermite_rows(rows_a) == hermite_rows(rows_b)
