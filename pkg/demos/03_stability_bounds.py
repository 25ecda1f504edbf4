"""Measured hypothesis constants and the sampled stability bound.

Runs the shipped stability experiments end to end and prints the measured
constant theta_hat, the worst ratio ||f - d|| / bound and the iteration
counts.  The p = 2 perturbation only works in the descending direction.
"""
import numpy as np

from hyerslab import ControlFunction, load_config, matrix_algebra, run_experiment, tilde_phi

for name in ("m2_bounded.json", "m2_power_pneg05.json", "m2_power_p2_descending.json",
             "t2_bounded.json", "failing/m2_power_p2_ascending.json"):
    report = run_experiment(load_config(name))
    if report.stage_error:
        print(f"{report.id:28s} stage error in {report.stage_error['stage']}: {report.stage_error['error']}")
        continue
    b = report.assertion("bound_main")
    print(f"{report.id:28s} passed={report.passed!s:5s} theta_hat={report.data['theta_hat']:.4f} "
          f"max ratio={b['max_ratio']:.3f} iterations={report.data['iterations']}")

# The bound itself: closed forms of the doubling series for power controls.
A = matrix_algebra(2)
a = np.array([2.0, 0, 0, 0], dtype=complex)
zero = np.zeros(4)
print("\n   p   direction   series value")
for p, direction in ((0.0, "ascending"), (0.5, "ascending"), (2.0, "descending"), (3.0, "descending")):
    r = tilde_phi(ControlFunction(A, "power", 0.1, p), a, a, zero, direction)
    print(f"{p:4.1f}   {direction:10s}  {r.value:.6f}  (partial sums agree to {r.crosscheck_error:.1e})")
