"""One test per acceptance criterion, each at its stated tolerance."""
import time

import numpy as np
import pytest

from hyerslab import (
    Bimodule,
    ControlFunction,
    DivergentSeries,
    LinearMap,
    dual_numbers,
    extract_delta,
    gjd_defect,
    hyers_limit,
    inner_derivation,
    jordan_defect,
    load_config,
    matrix_algebra,
    right_multiplier,
    run_experiment,
    solve_generalized_jordan_pairs,
    solve_jordan_derivations,
    tilde_phi,
    upper_triangular_algebra,
)
from hyerslab.cli import main
from hyerslab.config import shipped_configs
from hyerslab.verify import experiment_maps, uniqueness_gap


@pytest.fixture(scope="module")
def bounded_run():
    cfg = load_config("m2_bounded.json")
    t0 = time.perf_counter()
    report = run_experiment(cfg)
    return cfg, report, time.perf_counter() - t0


def test_oracle_soundness(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    member = 0.0
    for A in (matrix_algebra(2), matrix_algebra(1), dual_numbers(), upper_triangular_algebra(2)):
        X = Bimodule.regular(A)
        rng = np.random.default_rng(100)
        a = A.random_elements(rng, 1000)
        scale = 1 + A.norm(a) ** 2
        jspace = solve_jordan_derivations(A)
        pspace = solve_generalized_jordan_pairs(A)
        for delta in jspace.basis:
            worst = max(worst, float(np.max(jordan_defect(delta, a, X) / scale)))
        for d, delta in pspace.basis:
            worst = max(worst, float(np.max(gjd_defect(d, delta, a, X) / scale)))
            worst = max(worst, float(np.max(jordan_defect(delta, a, X) / scale)))
        for x in A.random_elements(rng, 5, (0.1, 10)):
            member = max(member, jspace.membership_residual(inner_derivation(A, x)))
            member = max(member, pspace.membership_residual((right_multiplier(X, x), LinearMap.zero(A.dim))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and member <= 1e-8 and elapsed < 5
    acceptance(1, "oracle soundness", ok, f"residual {worst:.2e}, membership {member:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-8
    assert member <= 1e-8
    assert elapsed < 5


def test_closed_form_series(acceptance):
    t0 = time.perf_counter()
    A = matrix_algebra(2)
    theta = 0.05
    a = A.random_elements(np.random.default_rng(101), 1)[0]
    a *= 2.5 / A.norm(a)
    zero = np.zeros(4)
    errors = []
    for p in (0.0, 0.25, 0.5, 0.9):
        r = tilde_phi(ControlFunction(A, "power", theta, p), a, a, zero, "ascending")
        exact = theta * 2.5**p / (1 - 2 ** (p - 1))
        errors.append(abs(r.partial_sums[-1] - exact) / exact)
        errors.append(abs(r.value - exact) / exact)
    for p in (1.1, 2.0, 3.0):
        r = tilde_phi(ControlFunction(A, "power", theta, p), a, a, zero, "descending")
        exact = theta * 2.5**p / (2 ** (p - 1) - 1)
        errors.append(abs(r.partial_sums[-1] - exact) / exact)
        errors.append(abs(r.value - exact) / exact)
    const = tilde_phi(ControlFunction(A, "constant", theta), a, a, zero).value
    divergent = 0
    for direction in ("ascending", "descending"):
        try:
            tilde_phi(ControlFunction(A, "power", theta, 1.0), a, a, zero, direction)
        except DivergentSeries:
            divergent += 1
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    ok = worst <= 1e-9 and const == theta and divergent == 2 and elapsed < 1
    acceptance(2, "closed-form series", ok, f"max rel error {worst:.2e}, constant {const}, {elapsed:.3f}s")
    assert worst <= 1e-9
    assert const == theta
    assert divergent == 2
    assert elapsed < 1


def test_hyers_recovery(acceptance, bounded_run):
    cfg, report, elapsed = bounded_run
    assert report.stage_error is None, report.stage_error
    iterations = report.data["iterations"]["d"]
    lin = report.assertion("linearity")
    bound = report.assertion("bound_main")
    ok = (
        iterations <= 40
        and lin["max_additive"] <= 1e-9
        and lin["max_homogeneity"] <= 1e-9
        and bound["violations"] == 0
        and bound["samples_used"] >= 10_000
        and elapsed < 30
    )
    acceptance(3, "Hyers recovery", ok,
               f"{iterations} iterations, {bound['violations']} violations / {bound['samples_used']}, "
               f"theta_hat {report.data['theta_hat']:.4g}, {elapsed:.1f}s")
    assert iterations <= 40
    assert lin["max_additive"] <= 1e-9 and lin["max_homogeneity"] <= 1e-9
    assert bound["samples_used"] >= 10_000 and bound["violations"] == 0
    assert elapsed < 30


def test_limit_structure(acceptance, bounded_run):
    cfg, _, _ = bounded_run
    f, g = experiment_maps(cfg)
    X = f.bimodule
    A = X.algebra
    d = hyers_limit(f).limit
    delta = extract_delta(g).limit
    a = A.random_elements(np.random.default_rng(102), 1000)
    scale = 1 + A.norm(a) ** 2
    gjd = float(np.max(gjd_defect(d, delta, a, X) / scale))
    jd = float(np.max(jordan_defect(delta, a, X) / scale))
    ok = gjd <= 1e-6 and jd <= 1e-6
    acceptance(4, "limit structure", ok, f"generalized Jordan {gjd:.2e}, Jordan {jd:.2e}")
    assert gjd <= 1e-6
    assert jd <= 1e-6


def test_decay_rate(acceptance):
    slopes = {}
    for name, expected in (
        ("superstability_bounded.json", -1.0),
        ("superstability_p025.json", -0.75),
        ("superstability_p05.json", -0.5),
    ):
        cfg = load_config(name)
        assert tuple(cfg.slope_window) == (5, 25)
        report = run_experiment(cfg)
        slopes[name] = (report.data["decay_slope"], expected)
    ok = all(abs(s - e) <= 0.15 for s, e in slopes.values())
    acceptance(5, "decay-rate law", ok, ", ".join(f"{s:.3f} vs {e}" for s, e in slopes.values()))
    for s, e in slopes.values():
        assert abs(s - e) <= 0.15


def test_direction_duality(acceptance):
    up = run_experiment(load_config("failing/m2_power_p2_ascending.json"))
    down = run_experiment(load_config("m2_power_p2_descending.json"))
    up_error = (up.stage_error or {}).get("error")
    bound = down.assertion("bound_main") if down.stage_error is None else {"violations": -1, "samples_used": 0, "bound_kind": None}
    ok = (
        up_error == "NoConvergence"
        and down.passed
        and bound["violations"] == 0
        and bound["samples_used"] >= 10_000
        and bound["bound_kind"] == "power_p_gt_1"
    )
    acceptance(6, "direction duality", ok,
               f"ascending {up_error}, descending {bound['violations']} violations / {bound['samples_used']}")
    assert up_error == "NoConvergence"
    assert down.passed
    assert bound["violations"] == 0 and bound["samples_used"] >= 10_000


def test_uniqueness(acceptance):
    gaps = {}
    for name in shipped_configs():
        cfg = load_config(name)
        assert cfg.schedules == ((30, 1e-8), (45, 1e-11))
        f, g = experiment_maps(cfg)
        gaps[name] = uniqueness_gap(f, g, cfg.resolved_direction(), cfg.schedules)
    worst = max(gaps.values())
    acceptance(7, "uniqueness probe", worst <= 1e-6, f"max gap {worst:.2e} over {len(gaps)} experiments")
    assert worst <= 1e-6


def test_determinism(acceptance, tmp_path, capsys, monkeypatch):
    configs = ["m2_bounded.json", "superstability_p05.json"]
    outputs = []
    for run, threads in (("first", "1"), ("second", "2")):
        monkeypatch.setenv("HYERSLAB_THREADS", threads)
        out_dir = tmp_path / run
        code = main(["experiment", *configs, "--seed", "7", "--out", str(out_dir)])
        assert code == 0
        stdout = capsys.readouterr().out
        files = {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}
        outputs.append((stdout, files))
    same = outputs[0] == outputs[1]
    n_files = len(outputs[0][1])
    acceptance(8, "determinism", same, f"{n_files} files compared byte for byte")
    assert same
