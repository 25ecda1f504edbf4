import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyerslab import (
    Bimodule,
    LinearMap,
    RankUncertain,
    direct_sum,
    dual_numbers,
    inner_derivation,
    matrix_algebra,
    right_multiplier,
    solve,
    solve_derivations,
    solve_generalized_jordan_pairs,
    solve_jordan_derivations,
    upper_triangular_algebra,
)
from hyerslab.oracle import (
    KINDS,
    null_space,
    proper_jordan_witness,
    solve_generalized_derivation_pairs,
    solve_jordan_by_squares,
    solve_right_multipliers,
)

ALGEBRAS = {
    "m2": lambda: matrix_algebra(2),
    "complex": lambda: matrix_algebra(1),
    "dual": dual_numbers,
    "t2": lambda: upper_triangular_algebra(2),
    "t3": lambda: upper_triangular_algebra(3),
    "m2+c": lambda: direct_sum(matrix_algebra(2), matrix_algebra(1)),
}

# Dimensions worked out by hand: derivations of M2 are inner (sl2, dim 3),
# of T_n they are inner modulo the centre (dim n(n+1)/2 - 1), of the dual
# numbers they are eps -> alpha eps (dim 1), of C there are none.  Every
# Jordan derivation on these algebras is a derivation, and a generalized
# Jordan pair is (delta + right multiplier, delta), adding dim A.
EXPECTED = {
    "m2": (3, 3, 7),
    "complex": (0, 0, 1),
    "dual": (1, 1, 3),
    "t2": (2, 2, 5),
    "t3": (5, 5, 11),
    "m2+c": (3, 3, 8),
}


def product_rule_dimension(A):
    """Derivation-space dimension by brute force on basis pairs.

    Builds the map D -> [D(e_i e_j) - e_i D(e_j) - D(e_i) e_j]_{ij} column by
    column on matrix units and reads off its rank.
    """
    n = A.dim
    cols = []
    basis = np.eye(n, dtype=complex)
    for p in range(n):
        for q in range(n):
            D = np.zeros((n, n), dtype=complex)
            D[p, q] = 1
            res = []
            for i in range(n):
                for j in range(n):
                    ei, ej = basis[i], basis[j]
                    res.append(D @ A.mul(ei, ej) - A.mul(ei, D @ ej) - A.mul(D @ ei, ej))
            cols.append(np.concatenate(res))
    M = np.array(cols).T
    return n * n - np.linalg.matrix_rank(M, tol=1e-9)


@pytest.mark.parametrize("name", sorted(ALGEBRAS))
def test_solution_dimensions(name):
    A = ALGEBRAS[name]()
    der, jd, gjp = EXPECTED[name]
    assert solve_derivations(A).dim == der
    assert solve_jordan_derivations(A).dim == jd
    assert solve_generalized_jordan_pairs(A).dim == gjp


@pytest.mark.parametrize("name", sorted(ALGEBRAS))
def test_independent_solvers_agree(name):
    A = ALGEBRAS[name]()
    assert product_rule_dimension(A) == solve_derivations(A).dim
    assert solve_jordan_by_squares(A) == solve_jordan_derivations(A).dim


@pytest.mark.parametrize("name", sorted(ALGEBRAS))
def test_no_proper_jordan_derivations(name):
    assert proper_jordan_witness(ALGEBRAS[name]()) is None


def test_generalized_derivation_pairs_match_jordan_pairs_on_m2():
    A = matrix_algebra(2)
    assert solve_generalized_derivation_pairs(A).dim == 7
    assert solve_right_multipliers(A).dim == 4


@pytest.mark.parametrize("name", sorted(ALGEBRAS))
def test_basis_satisfies_identity(name):
    A = ALGEBRAS[name]()
    X = Bimodule.regular(A)
    a = A.random_elements(np.random.default_rng(11), 300)
    scale = 1 + A.norm(a) ** 2
    for d in solve_jordan_derivations(A).basis:
        r = X.norm(d(A.square(a)) - X.left_act(a, d(a)) - X.right_act(d(a), a))
        assert np.all(r <= 1e-8 * scale)
    for d, delta in solve_generalized_jordan_pairs(A).basis:
        r = X.norm(d(A.square(a)) - X.left_act(a, d(a)) - X.right_act(delta(a), a))
        assert np.all(r <= 1e-8 * scale)


def test_inner_derivation_value():
    A = matrix_algebra(2)
    e12, e22 = A.basis_element(1), A.basis_element(3)
    # [E12, E22] = E12 E22 - E22 E12 = E12
    np.testing.assert_allclose(inner_derivation(A, e12)(e22), e12, atol=1e-15)


def test_inner_derivations_lie_in_jordan_space():
    A = matrix_algebra(2)
    space = solve_jordan_derivations(A)
    rng = np.random.default_rng(12)
    for x in A.random_elements(rng, 10, (0.1, 10)):
        assert space.membership_residual(inner_derivation(A, x)) < 1e-10


def test_right_multipliers_lie_in_pair_space():
    A = upper_triangular_algebra(2)
    X = Bimodule.regular(A)
    space = solve_generalized_jordan_pairs(A)
    for x0 in A.random_elements(np.random.default_rng(13), 10, (0.1, 10)):
        R = right_multiplier(X, x0)
        assert space.membership_residual((R, LinearMap.zero(A.dim))) < 1e-10


def test_transpose_is_not_a_jordan_derivation():
    A = matrix_algebra(2)
    T = LinearMap(np.eye(4)[[0, 2, 1, 3]])
    # the transpose is orthogonal to ad(M2); against the pair space only
    # the right-multiplier part of (T, T) survives, leaving sqrt(7/8)
    assert solve_jordan_derivations(A).membership_residual(T) == pytest.approx(1.0, abs=1e-12)
    assert solve_generalized_jordan_pairs(A).membership_residual((T, T)) == pytest.approx(math.sqrt(7 / 8), abs=1e-12)


def test_difference_is_right_multiplier():
    A = matrix_algebra(2)
    X = Bimodule.regular(A)
    for d, delta in solve_generalized_jordan_pairs(A).basis:
        h = d - delta
        R = right_multiplier(X, h(A.unit))
        np.testing.assert_allclose(h.matrix, R.matrix, atol=1e-10)


def test_basis_is_canonical():
    A = matrix_algebra(2)
    b1 = solve_jordan_derivations(A).coordinates()
    b2 = solve_jordan_derivations(A).coordinates()
    np.testing.assert_array_equal(b1, b2)
    np.testing.assert_allclose(b1 @ b1.conj().T, np.eye(3), atol=1e-12)


def test_null_space_rank_uncertain():
    M = np.diag([1.0, 1e-8, 0.0])
    with pytest.raises(RankUncertain) as info:
        null_space(M)
    assert len(info.value.spectrum) == 3


def test_solve_dispatch_and_unknown_kind():
    A = dual_numbers()
    for kind in KINDS:
        assert solve(A, None, kind).kind == kind
    with pytest.raises(ValueError):
        solve(A, None, "automorphism")


def test_to_dict_shape():
    out = solve_generalized_jordan_pairs(dual_numbers()).to_dict()
    assert out["dimension"] == 3
    assert set(out["basis"][0]) == {"d", "delta"}
    assert len(out["basis"][0]["d"]) == 2 and len(out["basis"][0]["d"][0][0]) == 2


coeffs = st.lists(st.floats(-5, 5, allow_nan=False), min_size=7, max_size=7)


@settings(max_examples=50, deadline=None)
@given(coeffs)
def test_span_members_satisfy_identity(cs):
    A = matrix_algebra(2)
    X = Bimodule.regular(A)
    space = solve_generalized_jordan_pairs(A)
    d = sum((c * p[0] for c, p in zip(cs, space.basis)), LinearMap.zero(4))
    delta = sum((c * p[1] for c, p in zip(cs, space.basis)), LinearMap.zero(4))
    a = A.random_elements(np.random.default_rng(14), 50)
    r = X.norm(d(A.square(a)) - X.left_act(a, d(a)) - X.right_act(delta(a), a))
    assert np.all(r <= 1e-8 * (1 + sum(abs(c) for c in cs)) * (1 + A.norm(a) ** 2))
