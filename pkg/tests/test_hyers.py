import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyerslab import (
    ControlFunction,
    DivergentSeries,
    IterationOverflow,
    LinearMap,
    NoConvergence,
    PerturbationModel,
    hyers_limit,
    inner_derivation,
    make_perturbed,
    matrix_algebra,
    tilde_phi,
)
from hyerslab.hyers import power_bound, rassias_bound


@pytest.fixture(scope="module")
def m2():
    return matrix_algebra(2)


@pytest.fixture(scope="module")
def d0(m2):
    return inner_derivation(m2, np.array([0.5, 1.0, -1j, 0.2]))


def element(A, norm, seed=0):
    x = A.random_elements(np.random.default_rng(seed), 1)[0]
    return x * (norm / A.norm(x))


@pytest.mark.parametrize("p", [0.25, 0.5, 0.9, -0.5])
def test_ascending_power_series_closed_form(m2, p):
    a = element(m2, 3.0)
    theta = 0.05
    r = tilde_phi(ControlFunction(m2, "power", theta, p), a, a, np.zeros(4), "ascending")
    assert r.value == pytest.approx(theta * 3.0**p / (1 - 2 ** (p - 1)), rel=1e-12)
    assert r.crosscheck_error <= 1e-9


@pytest.mark.parametrize("p", [1.1, 2.0, 3.0])
def test_descending_power_series_closed_form(m2, p):
    a = element(m2, 0.7)
    theta = 0.05
    r = tilde_phi(ControlFunction(m2, "power", theta, p), a, a, np.zeros(4), "descending")
    assert r.value == pytest.approx(theta * 0.7**p / (2 ** (p - 1) - 1), rel=1e-12)
    assert r.crosscheck_error <= 1e-9


def test_three_term_p0_gives_two_theta(m2):
    a = element(m2, 5.0)
    r = tilde_phi(ControlFunction(m2, "power", 0.1, 0.0), a, a, np.zeros(4))
    assert r.value == pytest.approx(0.2, rel=1e-12)


def test_constant_control_gives_theta(m2):
    a = element(m2, 5.0)
    r = tilde_phi(ControlFunction(m2, "constant", 0.1), a, a, np.zeros(4))
    assert r.value == 0.1
    assert r.partial_sums[-1] == pytest.approx(0.1, rel=1e-14)


@pytest.mark.parametrize("direction", ["ascending", "descending"])
def test_p1_diverges(m2, direction):
    a = element(m2, 1.0)
    with pytest.raises(DivergentSeries) as info:
        tilde_phi(ControlFunction(m2, "power", 0.1, 1.0), a, a, np.zeros(4), direction)
    assert len(info.value.trajectory) > 0
    r = tilde_phi(ControlFunction(m2, "power", 0.1, 1.0), a, a, np.zeros(4), direction, strict=False)
    assert not r.converged and math.isinf(r.value)


def test_wrong_direction_diverges(m2):
    a = element(m2, 1.0)
    with pytest.raises(DivergentSeries):
        tilde_phi(ControlFunction(m2, "power", 0.1, 2.0), a, a, np.zeros(4), "ascending")
    with pytest.raises(DivergentSeries):
        tilde_phi(ControlFunction(m2, "power", 0.1, 0.5), a, a, np.zeros(4), "descending")


def test_custom_control_uses_partial_sums(m2):
    phi = ControlFunction(m2, "custom", func=lambda a, b, c: 0.1 * m2.norm(a) ** 0.5)
    a = element(m2, 2.0)
    r = tilde_phi(phi, a, a, np.zeros(4))
    assert r.closed_form is None
    assert r.value == pytest.approx(0.05 * 2.0**0.5 / (1 - 2**-0.5), rel=1e-12)


def test_literal_forms_differ(m2):
    a = element(m2, 2.0)
    phi = ControlFunction(m2, "power", 0.1, 0.5)
    lit = tilde_phi(phi, a, a, np.zeros(4), literal=True)
    assert lit.value == pytest.approx(float(phi(a, a, np.zeros(4))), rel=1e-12)
    assert lit.value != tilde_phi(phi, a, a, np.zeros(4)).value


def test_closed_form_helpers():
    assert power_bound(0.1, 0.5, 4.0) == pytest.approx(0.2 / (1 - 2**-0.5))
    assert rassias_bound(0.1, 2.0, 1.0) == pytest.approx(0.1)
    with pytest.raises(DivergentSeries):
        power_bound(0.1, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 0.95), st.floats(1e-2, 1e2))
def test_direction_duality(p, norm):
    """The ascending series at p mirrors the descending one at 2 - p."""
    A = matrix_algebra(1)
    a = np.array([norm + 0j])
    up = tilde_phi(ControlFunction(A, "power", 1.0, p), a, a, np.zeros(1), "ascending")
    assert up.value == pytest.approx(norm**p / (1 - 2 ** (p - 1)), rel=1e-12)
    q = 2.0 - p
    down = tilde_phi(ControlFunction(A, "power", 1.0, q), a, a, np.zeros(1), "descending")
    assert down.value * (2 ** (q - 1) - 1) == pytest.approx(norm**q, rel=1e-12)


# ---------------------------------------------------------------------------


def test_exact_map_is_fixed_point(m2, d0):
    f = make_perturbed(d0, PerturbationModel(), m2)
    res = hyers_limit(f)
    assert res.iterations_used == 1
    np.testing.assert_allclose(res.limit.matrix, d0.matrix, atol=1e-14)


def test_bounded_perturbation_recovered(m2, d0):
    f = make_perturbed(d0, PerturbationModel("bounded", 0.05, direction_seed=1), m2)
    phi = ControlFunction(m2, "constant", 0.15)
    res = hyers_limit(f, phi=phi)
    assert res.converged and res.linearized
    assert res.iterations_used <= 40
    assert np.abs(res.limit.matrix - d0.matrix).max() < 1e-8
    assert res.history.shape == (4, res.iterations_used)
    assert res.decay_slope() == pytest.approx(-1.0, abs=0.1)
    assert res.cauchy_bound_check <= 1e-12
    assert len(res.history_rows()) == 4 * res.iterations_used


def test_power_p2_needs_descending(m2, d0):
    f = make_perturbed(d0, PerturbationModel("power", 0.05, 2.0, direction_seed=2), m2)
    with pytest.raises((NoConvergence, IterationOverflow)):
        hyers_limit(f, "ascending")
    res = hyers_limit(f, "descending")
    assert np.abs(res.limit.matrix - d0.matrix).max() < 1e-8


def test_no_convergence_carries_partial_result(m2, d0):
    f = make_perturbed(d0, PerturbationModel("bounded", 0.05, direction_seed=3), m2)
    with pytest.raises(NoConvergence) as info:
        hyers_limit(f, n_max=5)
    assert info.value.result.iterations_used == 5
    assert not info.value.result.converged


def test_overflow_detected(m2):
    f = make_perturbed(LinearMap.zero(4), PerturbationModel("power", 1.0, 30.0, direction_seed=4), m2)
    with pytest.raises(IterationOverflow):
        hyers_limit(f, "ascending", n_max=50)


def test_argument_validation(m2, d0):
    f = make_perturbed(d0, PerturbationModel(), m2)
    with pytest.raises(ValueError):
        hyers_limit(f, n_max=0)
    with pytest.raises(ValueError):
        hyers_limit(f, n_max=51)
    with pytest.raises(ValueError):
        hyers_limit(f, "sideways")

    class Shifted:
        algebra = m2
        bimodule = f.bimodule

        def __call__(self, x):
            return f(x) + 1

    with pytest.raises(ValueError):
        hyers_limit(Shifted())
