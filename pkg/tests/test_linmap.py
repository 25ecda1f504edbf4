import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyerslab import (
    DimensionMismatch,
    InvalidModel,
    LinearMap,
    PerturbationModel,
    TorusSampler,
    c_linearity_report,
    make_perturbed,
    matrix_algebra,
)
from hyerslab.linmap import hashed_gaussian, homogeneity_defect
from hyerslab.oracle import inner_derivation


@pytest.fixture
def m2():
    return matrix_algebra(2)


def test_linear_map_batched(m2):
    rng = np.random.default_rng(0)
    M = LinearMap(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    x = rng.standard_normal((7, 4)) + 0j
    np.testing.assert_allclose(M(x), (M.matrix @ x.T).T)
    with pytest.raises(DimensionMismatch):
        M(np.ones(3))


def test_linear_map_arithmetic():
    I = LinearMap.identity(3)
    Z = LinearMap.zero(3)
    np.testing.assert_array_equal((I + Z).matrix, I.matrix)
    np.testing.assert_array_equal((I - I).matrix, Z.matrix)
    np.testing.assert_array_equal((2 * I).matrix, 2 * np.eye(3))


def test_perturbation_kinds_validated():
    with pytest.raises(InvalidModel):
        PerturbationModel("wobbly", 0.1)
    with pytest.raises(InvalidModel):
        PerturbationModel("bounded", -1.0)
    with pytest.raises(InvalidModel):
        PerturbationModel("custom", 0.1)


def test_hashed_direction_is_deterministic():
    x = np.array([0.3 + 0.1j, -1.2, 0.0, 2j])
    u = hashed_gaussian(x, 7, 4)
    np.testing.assert_array_equal(u, hashed_gaussian(x.copy(), 7, 4))
    assert not np.allclose(u, hashed_gaussian(x, 8, 4))


def test_bounded_perturbation_magnitude(m2):
    d0 = inner_derivation(m2, m2.basis_element(1))
    f = make_perturbed(d0, PerturbationModel("bounded", 0.05, direction_seed=3), m2)
    x = m2.random_elements(np.random.default_rng(1), 200)
    np.testing.assert_allclose(m2.norm(f(x) - d0(x)), 0.05, rtol=1e-12)
    np.testing.assert_array_equal(f(np.zeros(4)), 0)


def test_power_perturbation_magnitude(m2):
    d0 = LinearMap.zero(4)
    f = make_perturbed(d0, PerturbationModel("power", 0.1, 2.0, direction_seed=4), m2)
    x = m2.random_elements(np.random.default_rng(2), 200)
    np.testing.assert_allclose(m2.norm(f(x)), 0.1 * m2.norm(x) ** 2, rtol=1e-12)


def test_perturbed_map_is_pure_function(m2):
    f = make_perturbed(LinearMap.zero(4), PerturbationModel("bounded", 1.0, direction_seed=5), m2)
    x = m2.random_elements(np.random.default_rng(3), 10)
    np.testing.assert_array_equal(f(x), f(x))
    np.testing.assert_array_equal(f(x)[3], f(x[3]))


def test_torus_sampler_opens_with_special_points():
    lam = TorusSampler(grid_size=4, seed=0).sample(20)
    np.testing.assert_allclose(lam[:4], [1, -1, 1j, -1j])
    np.testing.assert_allclose(np.abs(lam), 1.0, rtol=1e-14)


def test_linearity_accepts_linear_maps(m2):
    d = inner_derivation(m2, np.array([1, 2j, -1, 0.5]))
    rep = c_linearity_report(d, TorusSampler(), 128)
    assert rep.verdict
    assert rep.alpha_residual is not None and rep.alpha_residual < 1e-9


def test_linearity_rejects_conjugation():
    conj = lambda x: np.conj(x)
    rep = c_linearity_report(conj, TorusSampler(), 64, dim=4)
    assert not rep.verdict
    assert rep.alpha_residual is None
    # frozen: ||conj(i x) - i conj(x)|| = 2 ||x|| for the Euclidean norm
    x = np.array([1.0, 0, 0, 0])
    assert float(homogeneity_defect(conj, x, 1j, norm=lambda v: np.linalg.norm(v, axis=-1))) == pytest.approx(2.0)


def test_linearity_rejects_bounded_perturbation(m2):
    f = make_perturbed(LinearMap.zero(4), PerturbationModel("bounded", 0.01, direction_seed=6), m2)
    assert not c_linearity_report(f, TorusSampler(), 32).verdict


unit_angles = st.floats(0, 2 * np.pi, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(unit_angles, st.integers(0, 2**31 - 1))
def test_linear_maps_are_torus_homogeneous(theta, seed):
    rng = np.random.default_rng(seed)
    M = LinearMap(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    lam = np.exp(1j * theta)
    assert float(homogeneity_defect(M, x, lam)) <= 1e-12 * (1 + np.linalg.norm(M.matrix) * np.linalg.norm(x))
