"""Why approximate solutions of the unscaled identity are forced to be exact.

Rescaling the identity by 2^n leaves a defect that shrinks like 2^(n(p-1))
for a perturbation of growth order p < 1.  The fitted slopes of log2 of the
scaled defect against n reproduce p - 1.
"""
import numpy as np

from hyerslab import PerturbationModel, make_perturbed, matrix_algebra, solve_generalized_jordan_pairs
from hyerslab.verify import decay_profile, fit_slope

A = matrix_algebra(2)
d0, delta0 = solve_generalized_jordan_pairs(A).basis[0]
g = make_perturbed(delta0, PerturbationModel(), A)
cs = A.random_elements(np.random.default_rng(3), 16, (1.0, 1.0))

for model in (
    PerturbationModel("bounded", 0.05, direction_seed=1),
    PerturbationModel("power", 0.05, 0.25, direction_seed=2),
    PerturbationModel("power", 0.05, 0.5, direction_seed=3),
):
    f = make_perturbed(d0, model, A)
    ns, vals = decay_profile(f, g, cs, (5, 25))
    print(f"{model.kind:8s} p={model.growth_exponent:<5} slope {fit_slope(ns, vals):+.3f}"
          f"  (expected {model.growth_exponent - 1:+.2f})")

# Descending direction for p > 1.
f = make_perturbed(d0, PerturbationModel("power", 0.05, 3.0, direction_seed=4), A)
ns, vals = decay_profile(f, g, cs, (5, 25), "descending")
print(f"power    p=3.0   slope {fit_slope(ns, vals):+.3f}  (expected -2.00, descending)")
