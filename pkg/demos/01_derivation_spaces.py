"""Exact derivation-type maps on small algebras.

Solves the linearized Jordan identities on a handful of algebras and shows
that on each of them every generalized Jordan pair is an inner derivation
plus a right multiplier.
"""
import numpy as np

from hyerslab import (
    Bimodule,
    direct_sum,
    dual_numbers,
    inner_derivation,
    matrix_algebra,
    right_multiplier,
    solve_derivations,
    solve_generalized_jordan_pairs,
    solve_jordan_derivations,
    upper_triangular_algebra,
)
from hyerslab.oracle import proper_jordan_witness

algebras = {
    "C": matrix_algebra(1),
    "dual numbers": dual_numbers(),
    "T2 (upper triangular)": upper_triangular_algebra(2),
    "M2": matrix_algebra(2),
    "M2 + C": direct_sum(matrix_algebra(2), matrix_algebra(1)),
}

print(f"{'algebra':24s} {'dim':>4s} {'der':>4s} {'jordan':>7s} {'pairs':>6s}  proper Jordan?")
for name, A in algebras.items():
    der = solve_derivations(A).dim
    jd = solve_jordan_derivations(A).dim
    pairs = solve_generalized_jordan_pairs(A).dim
    proper = proper_jordan_witness(A) is not None
    print(f"{name:24s} {A.dim:4d} {der:4d} {jd:7d} {pairs:6d}  {proper}")

# The pair space on M2 is spanned by (ad x + R_y, ad x).
A = matrix_algebra(2)
X = Bimodule.regular(A)
space = solve_generalized_jordan_pairs(A)
rng = np.random.default_rng(0)
x, y = A.random_elements(rng, 2)
candidate = (inner_derivation(A, x) + right_multiplier(X, y), inner_derivation(A, x))
print("\n(ad x + R_y, ad x) distance from pair space:", space.membership_residual(candidate))

# Conversely d - delta is always right multiplication by (d - delta)(1).
d, delta = space.basis[0]
h = d - delta
print("d - delta vs R_{h(1)}:", np.abs(h.matrix - right_multiplier(X, h(A.unit)).matrix).max())
