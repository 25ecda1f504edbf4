"""Defect functionals, bound checks and the end-to-end experiments.

A *defect* is the norm of the left-hand side of an identity or hypothesis
inequality at concrete arguments.  All defect functions accept a single
element or a stack of elements (with a matching array of scalars ``lam``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import Bimodule, bimodule_from_spec, make_algebra
from .config import ExperimentConfig
from .errors import DivergentSeries, HyersLabError, StageError
from .hyers import ControlFunction, HyersResult, extract_delta, hyers_limit, tilde_phi
from .linmap import LinearMap, MapUnderTest, PerturbationModel, TorusSampler, c_linearity_report, make_perturbed
from .oracle import solve

BOUND_RTOL = 1e-9


def _module(*maps, X=None) -> Bimodule:
    if X is not None:
        return X
    for m in maps:
        if isinstance(m, MapUnderTest):
            return m.bimodule
    raise ValueError("pass X= when no argument is a MapUnderTest")


def _lam(lam, x):
    lam = np.asarray(lam, dtype=complex)
    return lam[..., None] if lam.ndim else lam


def defect_superstab(f, g, a, b, c, lam, X=None):
    """``||f(a + lam b + c^2) - f(a) - lam f(b) - c f(c) - g(c) c||``; ``a`` is not scaled."""
    X = _module(f, g, X=X)
    A = X.algebra
    l = _lam(lam, a)
    arg = a + l * b + A.square(c)
    r = f(arg) - f(a) - l * f(b) - X.left_act(c, f(c)) - X.right_act(g(c), c)
    return X.norm(r)


def defect_stab_main(f, g, a, b, c, lam, X=None):
    """``||f(lam a + lam b + c^2) - lam f(a) - lam f(b) - c f(c) - g(c) c||``."""
    X = _module(f, g, X=X)
    A = X.algebra
    l = _lam(lam, a)
    arg = l * a + l * b + A.square(c)
    r = f(arg) - l * f(a) - l * f(b) - X.left_act(c, f(c)) - X.right_act(g(c), c)
    return X.norm(r)


def defect_aux(g, a, b, c, lam, X=None):
    """``||g(lam ab + lam c) - lam a g(b) - lam g(a) b - lam g(c)||``."""
    X = _module(g, X=X)
    A = X.algebra
    l = _lam(lam, a)
    r = g(l * A.mul(a, b) + l * c) - l * X.left_act(a, g(b)) - l * X.right_act(g(a), b) - l * g(c)
    return X.norm(r)


def additive_defect(f, a, b, X=None):
    X = _module(f, X=X)
    return X.norm(f(a + b) - f(a) - f(b))


def jordan_defect(delta, a, X):
    """``||delta(a^2) - a delta(a) - delta(a) a||``."""
    return gjd_defect(delta, delta, a, X)


def gjd_defect(d, delta, a, X):
    """``||d(a^2) - a d(a) - delta(a) a||``."""
    A = X.algebra
    return X.norm(d(A.square(a)) - X.left_act(a, d(a)) - X.right_act(delta(a), a))


# ---------------------------------------------------------------------------
# sampled reports

DEFECT_IDS = ("superstab", "superstab_aux", "stab_main", "stab_aux", "jordan", "generalized_jordan", "additive")


def _pairs(z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return [[float(v.real), float(v.imag)] for v in z]


@dataclass
class DefectReport:
    which: str
    max_defect: float
    witness: dict
    samples_used: int

    def to_dict(self):
        return {
            "which": self.which,
            "max_defect": self.max_defect,
            "witness": {k: _pairs(v) for k, v in self.witness.items()},
            "samples_used": self.samples_used,
        }


@dataclass
class TripleSample:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lam: np.ndarray

    def __len__(self):
        return len(self.lam)

    def row(self, k):
        return {"a": self.a[k], "b": self.b[k], "c": self.c[k], "lam": self.lam[k]}


def sample_triples(A, n, rng, norm_range=(1e-2, 1e2), diagonal=0, sampler=None, with_c=True):
    """Random ``(a, b, c, lam)``; the last ``diagonal`` rows are ``(x, x, 0, 1)``.

    ``with_c=False`` fixes ``c = 0`` on every row.

    Diagonal rows are where the doubling estimate ``||f(2x) - 2 f(x)||``
    lives, so they are always part of a measured control constant.
    """
    a = A.random_elements(rng, n, norm_range)
    b = A.random_elements(rng, n, norm_range)
    c = A.random_elements(rng, n, norm_range)
    if not with_c:
        c = np.zeros_like(c)
    sampler = sampler or TorusSampler(seed=int(rng.integers(2**31)))
    lam = sampler.sample(n)
    if diagonal:
        x = A.random_elements(rng, diagonal, norm_range)
        a = np.concatenate([a, x])
        b = np.concatenate([b, x])
        c = np.concatenate([c, np.zeros_like(x)])
        lam = np.concatenate([lam, np.ones(diagonal, dtype=complex)])
    return TripleSample(a, b, c, lam)


def evaluate_defect(which, f, g, s: TripleSample, X=None):
    if which == "superstab":
        return defect_superstab(f, g, s.a, s.b, s.c, s.lam, X)
    if which == "stab_main":
        return defect_stab_main(f, g, s.a, s.b, s.c, s.lam, X)
    if which in ("superstab_aux", "stab_aux"):
        return defect_aux(g, s.a, s.b, s.c, s.lam, X)
    if which == "additive":
        return additive_defect(f, s.a, s.b, X)
    X = _module(f, g, X=X)
    if which == "jordan":
        return jordan_defect(g, s.a, X)
    if which == "generalized_jordan":
        return gjd_defect(f, g, s.a, X)
    raise ValueError(f"unknown defect {which!r}")


def measure_defect(which, f, g, s: TripleSample, X=None, weights=None) -> DefectReport:
    """Max of a defect over a sample; ``weights`` divides each value (for power controls)."""
    vals = evaluate_defect(which, f, g, s, X)
    if weights is not None:
        vals = np.where(weights > 0, vals / np.where(weights > 0, weights, 1), 0.0)
    k = int(np.argmax(vals))
    return DefectReport(which, float(vals[k]), s.row(k), len(s))


@dataclass
class BoundReport:
    bound_kind: str
    max_ratio: float
    violations: int
    samples_used: int
    witness: np.ndarray | None = None

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        return {
            "bound_kind": self.bound_kind,
            "max_ratio": self.max_ratio,
            "violations": self.violations,
            "samples_used": self.samples_used,
            "passed": self.passed,
        }


def bound_kind_of(phi: ControlFunction):
    if phi.kind == "constant":
        return "constant"
    if phi.kind == "power":
        return "power_p_lt_1" if phi.p < 1 else "power_p_gt_1"
    return "gavruta_tilde"


def bound_values(phi: ControlFunction, a, direction):
    """``tilde_phi(a, a, 0)`` for every row of ``a`` (closed form when available)."""
    A = phi.algebra
    zero = np.zeros_like(a)
    if phi.kind in ("constant", "power"):
        first = tilde_phi(phi, a[0], a[0], zero[0], direction)  # raises on divergence
        if phi.kind == "constant":
            return np.full(len(a), first.value)
        base = phi(a, a, zero)
        if direction == "ascending":
            return base / (2.0 * (1.0 - 2.0 ** (phi.p - 1)))
        return base / (2.0 * (2.0 ** (phi.p - 1) - 1.0))
    return np.array([tilde_phi(phi, x, x, z, direction).value for x, z in zip(a, zero)])


def verify_bound(f, d: LinearMap, phi: ControlFunction, direction="ascending", n_samples=1000, *, seed=0,
                 norm_range=(1e-2, 1e2), rtol=BOUND_RTOL, X=None) -> BoundReport:
    """Sampled check of ``||f(a) - d(a)|| <= tilde_phi(a, a, 0)``."""
    X = _module(f, X=X)
    A = X.algebra
    rng = np.random.default_rng(seed)
    a = A.random_elements(rng, n_samples, norm_range)
    bound = bound_values(phi, a, direction)
    diff = X.norm(f(a) - d(a))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, diff / bound, np.where(diff > 0, np.inf, 0.0))
    k = int(np.argmax(ratio))
    return BoundReport(bound_kind_of(phi), float(ratio[k]), int(np.sum(ratio > 1 + rtol)), n_samples, a[k])


# ---------------------------------------------------------------------------
# experiments


@dataclass
class Report:
    id: str
    mode: str
    config: dict
    passed: bool = False
    assertions: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    stage_error: dict | None = None
    histories: list = field(default_factory=list)

    def check(self, name, ok, **detail):
        detail.pop("passed", None)
        self.assertions.append({"name": name, "passed": bool(ok), **detail})
        return bool(ok)

    def assertion(self, name):
        for a in self.assertions:
            if a["name"] == name:
                return a
        raise KeyError(name)

    def finish(self):
        self.passed = self.stage_error is None and bool(self.assertions) and all(a["passed"] for a in self.assertions)
        return self

    def to_dict(self):
        return {
            "experiment": self.id,
            "mode": self.mode,
            "seed": self.config.get("seed"),
            "config": self.config,
            "passed": self.passed,
            "stage_error": self.stage_error,
            "assertions": self.assertions,
            "data": self.data,
        }


class _Stage:
    def __init__(self, label):
        self.label = label

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, HyersLabError) and not isinstance(exc, StageError):
            raise StageError(self.label, exc) from exc
        return False


def _streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _setup(cfg: ExperimentConfig):
    with _Stage("oracle"):
        A = make_algebra(cfg.algebra)
        X = bimodule_from_spec(A, cfg.bimodule)
        space = solve(A, X, cfg.solution_kind)
    if space.dim == 0:
        raise StageError("oracle", HyersLabError(f"{cfg.solution_kind} space is trivial"))
    if not 0 <= cfg.solution_index < space.dim:
        raise StageError("oracle", HyersLabError(f"solution_index {cfg.solution_index} out of range {space.dim}"))
    elem = space.basis[cfg.solution_index]
    d0, delta0 = elem if space.is_pair else (elem, elem)
    return A, X, space, d0, delta0


def _history_rows(tag, result: HyersResult):
    return [(tag, i, n, dist, bound) for i, n, dist, bound in result.history_rows()]


def _normalized_max(values, a, A):
    return float(np.max(values / (1 + A.norm(a) ** 2)))


def _control(cfg, A, theta, p):
    kind = cfg.control.get("kind", "auto")
    if kind == "auto":
        kind = "power" if cfg.perturbation_f.kind == "power" else "constant"
    if kind == "constant":
        return ControlFunction(A, "constant", theta)
    return ControlFunction(A, "power", theta, float(cfg.control.get("p", p)))


def _power_weights(A, s: TripleSample, p):
    phi = ControlFunction(A, "power", 1.0, p)
    return phi(s.a, s.b, s.c)


def _matrix_gap(m1: LinearMap, m2: LinearMap):
    return float(np.abs(m1.matrix - m2.matrix).max())


def run_stability_experiment(cfg: ExperimentConfig) -> Report:
    """Perturb an exact pair, recover it by the doubling limit and check the stability bound."""
    report = Report(cfg.id, "stability", cfg.to_dict())
    try:
        _stability(cfg, report)
    except StageError as exc:
        report.stage_error = {"stage": exc.stage, "error": type(exc.cause).__name__, "message": str(exc.cause)}
    return report.finish()


def _stability(cfg, report):
    A, X, space, d0, delta0 = _setup(cfg)
    direction = cfg.resolved_direction()
    tol = cfg.tolerances
    f = make_perturbed(d0, cfg.perturbation_f, A, X)
    g = make_perturbed(delta0, cfg.perturbation_g, A, X)
    rng_defect, rng_bound, rng_struct = _streams(cfg.seed, 3)

    # measured hypothesis constants; the bound only uses the c = 0 slice of the main inequality
    p_ctrl = float(cfg.control.get("p", cfg.growth_exponent))
    use_power = _control(cfg, A, 0.0, p_ctrl).kind == "power"
    s0 = sample_triples(A, cfg.samples, rng_defect, cfg.norm_range, diagonal=max(cfg.samples // 4, 1), with_c=False)
    s = sample_triples(A, cfg.samples, rng_defect, cfg.norm_range)
    main = measure_defect("stab_main", f, g, s0, X, _power_weights(A, s0, p_ctrl) if use_power else None)
    full = measure_defect("stab_main", f, g, s, X, _power_weights(A, s, p_ctrl) if use_power else None)
    aux = measure_defect("stab_aux", f, g, s, X, _power_weights(A, s, p_ctrl) if use_power else None)
    theta_cfg = cfg.control.get("theta", "measured")
    theta_hat = main.max_defect if theta_cfg == "measured" else float(theta_cfg)
    theta_aux = max(full.max_defect, aux.max_defect) if theta_cfg == "measured" else float(theta_cfg)
    report.data["theta_hat"] = theta_hat
    report.data["theta_hat_full"] = full.max_defect
    report.data["theta_hat_aux"] = aux.max_defect
    report.data["defects"] = [main.to_dict(), full.to_dict(), aux.to_dict()]
    phi_main = _control(cfg, A, theta_hat, p_ctrl)

    # doubling limits
    with _Stage("hyers_limit"):
        res_d = hyers_limit(f, direction, cfg.n_max, tol["iteration"], phi=phi_main, seed=cfg.seed)
    with _Stage("extract_delta"):
        res_delta = extract_delta(g, direction, cfg.n_max, tol["iteration"], seed=cfg.seed)
    d, delta = res_d.limit, res_delta.limit
    report.histories += _history_rows("d", res_d) + _history_rows("delta", res_delta)
    report.data["direction"] = direction
    report.data["iterations"] = {"d": res_d.iterations_used, "delta": res_delta.iterations_used}
    report.data["convergence_slopes"] = {"d": res_d.decay_slope(), "delta": res_delta.decay_slope()}
    report.data["cauchy_tail_excess"] = res_d.cauchy_bound_check
    report.data["recovery_error"] = {"d": _matrix_gap(d, d0), "delta": _matrix_gap(delta, delta0)}

    # (i) linearity of the limit
    lin = c_linearity_report(d, TorusSampler(seed=cfg.seed), 256, seed=cfg.seed, norm=X.norm)
    report.check("linearity", lin.verdict, **lin.to_dict())

    # (ii) generalized Jordan structure of the limit
    a = A.random_elements(rng_struct, min(cfg.samples, 1000), cfg.norm_range)
    gjd = _normalized_max(gjd_defect(d, delta, a, X), a, A)
    jd = _normalized_max(jordan_defect(delta, a, X), a, A)
    report.check("limit_structure", gjd <= tol["defect"] and jd <= tol["defect"],
                 gjd_defect=gjd, jordan_defect=jd, tol=tol["defect"])

    # (iii) bound with the full measured hypothesis constant, and with the main defect alone
    seed_bound = int(rng_bound.integers(2**31))
    with _Stage("verify_bound"):
        phi_full = _control(cfg, A, max(theta_hat, theta_aux), p_ctrl)
        loose = verify_bound(f, d, phi_full, direction, cfg.samples, seed=seed_bound,
                            norm_range=cfg.norm_range, rtol=tol["bound"])
        strict = verify_bound(f, d, phi_main, direction, cfg.samples, seed=seed_bound,
                              norm_range=cfg.norm_range, rtol=tol["bound"])
    report.check("bound", loose.passed, theta=max(theta_hat, theta_aux), **loose.to_dict())
    report.check("bound_main", strict.passed, theta=theta_hat, **strict.to_dict())
    if cfg.control.get("kind", "auto") in ("auto", "constant") and not use_power:
        # the same constant control read as p = 0 in the three-term power control gives 2 theta
        report.data["p0_three_term_bound"] = 2.0 * theta_hat

    # (iv) uniqueness across iteration schedules
    with _Stage("uniqueness"):
        gap = uniqueness_gap(f, g, direction, cfg.schedules)
    report.check("uniqueness", gap <= tol["uniqueness"], max_gap=gap, tol=tol["uniqueness"])


def uniqueness_gap(f, g, direction, schedules):
    """Largest max-norm gap between the limits of ``f`` and ``g`` under different schedules.

    Each schedule is ``(n_max, tol)``; raises ``NoConvergence`` when one of
    them cannot reach its tolerance.
    """
    limits = [(hyers_limit(f, direction, n, t).limit, extract_delta(g, direction, n, t).limit) for n, t in schedules]
    gaps = [max(_matrix_gap(d1, d2), _matrix_gap(e1, e2)) for (d1, e1), (d2, e2) in zip(limits, limits[1:])]
    return max(gaps) if gaps else 0.0


def experiment_maps(cfg: ExperimentConfig):
    """The perturbed pair ``(f, g)`` an experiment runs the doubling iteration on.

    Superstability checks only fit a slope to ``f``; the map they iterate on
    the ``d`` side is the decaying recovery perturbation.
    """
    A, X, _, d0, delta0 = _setup(cfg)
    model = cfg.perturbation_f if cfg.mode == "stability" else _decay_model(cfg, cfg.resolved_direction())
    return make_perturbed(d0, model, A, X), make_perturbed(delta0, cfg.perturbation_g, A, X)


def scaled_superstability_defect(f, g, c, n, direction="ascending", X=None):
    """``||2^-2n f(2^2n c^2) - 2^-n c f(2^n c) - 2^-n g(2^n c) c||`` (ascending form)."""
    X = _module(f, g, X=X)
    A = X.algebra
    s = math.ldexp(1.0, n) if direction == "ascending" else math.ldexp(1.0, -n)
    inv = 1.0 / s
    c2 = A.square(c)
    r = inv * inv * f(s * s * c2) - inv * X.left_act(c, f(s * c)) - inv * X.right_act(g(s * c), c)
    return X.norm(r)


def expected_decay_slope(models, direction):
    exps = [m.growth_exponent for m in models if m.kind != "none" and m.growth_exponent is not None]
    if not exps:
        return None
    if direction == "ascending":
        return max(exps) - 1.0
    return 1.0 - min(exps)


def decay_profile(f, g, cs, window, direction="ascending", X=None):
    """Mean ``log2`` of the scaled defect over ``cs`` for each n in ``window``."""
    ns = np.arange(window[0], window[1] + 1)
    vals = np.array([scaled_superstability_defect(f, g, cs, int(n), direction, X) for n in ns])
    return ns, vals


def fit_slope(ns, vals):
    logs = np.log2(np.maximum(vals, 1e-300)).mean(axis=1)
    return float(np.polyfit(ns, logs, 1)[0])


def run_superstability_check(cfg: ExperimentConfig) -> Report:
    """Desk-scale check of the superstability mechanism."""
    report = Report(cfg.id, "superstability", cfg.to_dict())
    try:
        _superstability(cfg, report)
    except StageError as exc:
        report.stage_error = {"stage": exc.stage, "error": type(exc.cause).__name__, "message": str(exc.cause)}
    return report.finish()


def _superstability(cfg, report):
    A, X, space, d0, delta0 = _setup(cfg)
    direction = cfg.resolved_direction()
    tol = cfg.tolerances
    rng_c, rng_lin, rng_struct = _streams(cfg.seed, 3)
    report.data["direction"] = direction

    # (i) exact map is a fixed point of the doubling iteration
    with _Stage("fixed_point"):
        exact = make_perturbed(d0, PerturbationModel(), A, X)
        res = hyers_limit(exact, direction, cfg.n_max, tol["iteration"])
    gap = _matrix_gap(res.limit, d0)
    report.check("fixed_point", res.iterations_used == 1 and gap <= 1e-9, iterations=res.iterations_used, gap=gap)

    # (ii) decay of the scaled defect
    f = make_perturbed(d0, cfg.perturbation_f, A, X)
    g = make_perturbed(delta0, cfg.perturbation_g, A, X)
    cs = A.random_elements(rng_c, 16, (1.0, 1.0))
    ns, vals = decay_profile(f, g, cs, cfg.slope_window, direction, X)
    expected = expected_decay_slope([cfg.perturbation_f, cfg.perturbation_g], direction)
    report.data["scaled_defect"] = {"n": [int(n) for n in ns], "mean_log2": [float(v) for v in np.log2(np.maximum(vals, 1e-300)).mean(axis=1)]}
    if expected is None:
        worst = float(vals.max())
        report.check("decay_rate", worst <= 1e-9, max_scaled_defect=worst, expected_slope=None)
    else:
        slope = fit_slope(ns, vals)
        report.data["decay_slope"] = slope
        report.check("decay_rate", abs(slope - expected) <= 0.15, slope=slope, expected_slope=expected, tol=0.15)

    # (iii) extracted delta is T^1-additive and Jordan
    with _Stage("extract_delta"):
        res_delta = extract_delta(g, direction, cfg.n_max, tol["iteration"], seed=cfg.seed)
    delta = res_delta.limit
    report.histories += _history_rows("delta", res_delta)
    n = min(cfg.samples, 1000)
    a = A.random_elements(rng_lin, n, cfg.norm_range)
    c = A.random_elements(rng_lin, n, cfg.norm_range)
    lam = TorusSampler(seed=cfg.seed).sample(n)[:, None]
    add = X.norm(delta(lam * a + lam * c) - lam * delta(a) - lam * delta(c)) / (1 + A.norm(a) + A.norm(c))
    jd = _normalized_max(jordan_defect(delta, a, X), a, A)
    report.check("delta_additivity", float(add.max()) <= tol["defect"] and jd <= tol["defect"],
                 lambda_additivity=float(add.max()), jordan_defect=jd, tol=tol["defect"])

    # (iv) a perturbation that dies out under the iteration is removed exactly
    decay = _decay_model(cfg, direction)
    f_dec = make_perturbed(d0, decay, A, X)
    with _Stage("recovery"):
        res_rec = hyers_limit(f_dec, direction, cfg.n_max, tol["iteration"], seed=cfg.seed)
    report.histories += _history_rows("d", res_rec)
    a = A.random_elements(rng_struct, n, cfg.norm_range)
    gjd = _normalized_max(gjd_defect(res_rec.limit, delta, a, X), a, A)
    rec_gap = _matrix_gap(res_rec.limit, d0)
    report.check("recovery", rec_gap <= tol["uniqueness"] and gjd <= tol["defect"],
                 recovery_gap=rec_gap, gjd_defect=gjd, decay_model=decay.to_dict())

    # (v) uniqueness across iteration schedules
    with _Stage("uniqueness"):
        gap = uniqueness_gap(f_dec, g, direction, cfg.schedules)
    report.check("uniqueness", gap <= tol["uniqueness"], max_gap=gap, tol=tol["uniqueness"])


def _decay_model(cfg, direction):
    if cfg.decay is not None:
        return cfg.decay
    theta = cfg.perturbation_f.theta or 0.05
    return PerturbationModel("power", theta, -1.0 if direction == "ascending" else 3.0, cfg.perturbation_f.direction_seed)


def run_experiment(cfg: ExperimentConfig) -> Report:
    if cfg.mode == "superstability":
        return run_superstability_check(cfg)
    return run_stability_experiment(cfg)
