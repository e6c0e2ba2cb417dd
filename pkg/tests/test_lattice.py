from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_ricci import lattice as L


def matrices(max_n=4, max_m=5, bound=5):
    return st.integers(1, max_n).flatmap(
        lambda n: st.integers(1, max_m).flatmap(
            lambda m: st.lists(
                st.lists(st.integers(-bound, bound), min_size=m, max_size=m), min_size=n, max_size=n
            )
        )
    )


def test_identity_snf():
    snf = L.smith_normal_form(L.identity(3))
    assert snf.S == L.identity(3)
    assert snf.invariant_factors == (1, 1, 1)


def test_diag_2_3():
    assert L.smith_normal_form([[2, 0], [0, 3]]).invariant_factors == (1, 6)


def test_rank_forced_kernel():
    A = [[1, 0, 0], [0, 1, 0]]
    assert L.smith_normal_form(A).invariant_factors == (1, 1)
    assert L.integer_kernel(A).rank == 1


@settings(max_examples=150, deadline=None)
@given(matrices())
def test_snf_identity_and_chain(A):
    snf = L.smith_normal_form(A)
    assert L.matmul(L.matmul(snf.U, A), snf.V) == snf.S
    assert abs(L.det(snf.U)) == 1 and abs(L.det(snf.V)) == 1
    f = snf.invariant_factors
    for a, b in zip(f, f[1:]):
        assert (b == 0) or (a != 0 and b % a == 0)
    assert f == L.determinantal_factors(A)


@settings(max_examples=100, deadline=None)
@given(matrices())
def test_kernel_is_saturated(A):
    k = L.integer_kernel(A)
    m = len(A[0])
    for v in k.integer_kernel_basis:
        assert not any(L.matvec(A, v))
    assert k.rank == m - L.smith_normal_form(A).rank
    if k.rank:
        # saturated iff the basis matrix has all invariant factors 1
        assert set(L.smith_normal_form(k.integer_kernel_basis).invariant_factors) == {1}


def test_kernel_examples():
    assert L.integer_kernel([[1, 1]]).integer_kernel_basis in (((1, -1),), ((-1, 1),))
    assert L.integer_kernel([[2, 2]]).integer_kernel_basis in (((1, -1),), ((-1, 1),))
    assert L.integer_kernel(L.identity(4)).integer_kernel_basis == ()


def test_kernel_brute_force_small():
    A = [[1, 1]]
    found = [v for v in product(range(-3, 4), repeat=2) if any(v) and sum(v) == 0]
    lat = L.integer_kernel(A).integer_kernel_basis
    for v in found:
        assert L.solve_preimage(L.transpose(lat), v)[0].denominator == 1


@pytest.mark.parametrize(
    "vec,expected", [((1, 0, 0), True), ((2, 4), False), ((6, 10, 15), True)]
)
def test_is_primitive(vec, expected):
    assert L.is_primitive(vec) is expected


def test_zero_vector_rejected():
    with pytest.raises(L.LatticeError):
        L.is_primitive((0, 0))


def _common_element(a, b, max_den=4):
    """Brute force: a nontrivial element in G(a) cap G(b) among t/den."""
    n = len(a)
    for den in range(2, max_den + 1):
        for s in range(1, den):
            pa = tuple(Fraction(s * x, den) % 1 for x in a)
            if not any(pa):
                continue
            for t in range(den):
                if pa == tuple(Fraction(t * y, den) % 1 for y in b):
                    return True
    return False


@pytest.mark.parametrize(
    "a,b,expected", [((1, 0), (0, 1), True), ((1, 0), (1, 2), False), ((2, 1, 0), (1, 1, 0), True)]
)
def test_legality_pair(a, b, expected):
    assert L.legality_pair(a, b) is expected
    assert _common_element(a, b) is (not expected)


def test_legality_dependent():
    with pytest.raises(L.LatticeError):
        L.legality_pair((1, 0), (1, 0))


def test_solve_preimage_examples():
    assert L.solve_preimage(L.identity(3), (4, -1, 2)) == (4, -1, 2)
    w = L.solve_preimage([[1, 1]], (1,))
    assert sum(w) == 1 and all(x.denominator == 1 for x in w)
    for i in range(5):
        e = tuple(int(j == i) for j in range(5))
        assert L.solve_preimage(L.identity(5), e) == e


def test_solve_preimage_inconsistent():
    with pytest.raises(L.LatticeError):
        L.solve_preimage([[1, 0], [1, 0]], (1, 2))


@settings(max_examples=80, deadline=None)
@given(matrices(3, 4, 3), st.data())
def test_preimage_solves(A, data):
    m = len(A[0])
    w = data.draw(st.lists(st.integers(-3, 3), min_size=m, max_size=m))
    y = L.matvec(A, w)
    sol = L.solve_preimage(A, y)
    assert L.matvec(A, sol) == y


def test_same_lattice_and_saturate():
    assert L.same_lattice([[2, 0], [0, 1]], [[2, 1], [0, 1]])
    assert L.saturate([[2, 2]]) in (((1, 1),),)
