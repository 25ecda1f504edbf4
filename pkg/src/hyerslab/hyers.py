"""Direct-method limits and control-function series.

Ascending iteration: ``d_n(x) = 2**-n f(2**n x)``.
Descending iteration: ``d_n(x) = 2**n f(2**-n x)``.

The weighted series bounding ``||f - d||`` is

    ascending:  (1/2) sum_{i>=0} 2**-i phi(2**i a, 2**i b, 2**i c)
    descending: (1/2) sum_{i>=1} 2**i  phi(2**-i a, 2**-i b, 2**-i c)

For ``phi = theta (||a||^p + ||b||^p + ||c||^p)`` these sum at ``(a, a, 0)``
to ``theta ||a||^p / (1 - 2**(p-1))`` (p < 1) and
``theta ||a||^p / (2**(p-1) - 1)`` (p > 1).  Neither converges at p = 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import Algebra
from .errors import DivergentSeries, IterationOverflow, NoConvergence
from .linmap import LinearMap, TorusSampler, c_linearity_report

log = logging.getLogger(__name__)

DIRECTIONS = ("ascending", "descending")
OVERFLOW_LIMIT = 1e280
STAGNATION_RUN = 50
STAGNATION_RTOL = 1e-15
MAX_TERMS = 10_000


def _check_direction(direction):
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


@dataclass(frozen=True)
class ControlFunction:
    """Admissible control ``phi(a, b, c) >= 0``.

    ``power`` evaluates ``theta (||a||^p + ||b||^p + ||c||^p)`` with a zero
    element contributing 0 for every ``p`` (so ``0**0 = 0``).
    """

    algebra: Algebra
    kind: str = "constant"
    theta: float = 0.0
    p: float = 0.0
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("constant", "power", "custom"):
            raise ValueError(f"unknown control kind {self.kind!r}")
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom control needs a callable")

    def _powered_norm(self, x):
        x = np.asarray(x, dtype=complex)
        n = np.asarray(self.algebra.norm(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(n > 0, np.abs(n) ** self.p, 0.0)
        return out

    def __call__(self, a, b, c):
        if self.kind == "constant":
            shape = np.shape(np.asarray(a))[:-1]
            return np.full(shape, self.theta) if shape else self.theta
        if self.kind == "power":
            total = self._powered_norm(a) + self._powered_norm(b) + self._powered_norm(c)
            return self.theta * total
        value = self.func(a, b, c)
        if np.any(np.asarray(value) < 0):
            raise ValueError("control function returned a negative value")
        return value


@dataclass
class SeriesResult:
    value: float
    converged: bool
    n_terms: int
    partial_sums: list
    closed_form: float | None = None
    crosscheck_error: float | None = None


def _closed_form(phi, a, b, c, direction, literal):
    if phi.kind == "constant":
        if direction == "ascending":
            return phi.theta
        if literal:
            return phi.theta / 2.0
        return math.inf if phi.theta > 0 else 0.0
    if phi.kind != "power":
        return None
    base = float(phi(a, b, c))
    p = phi.p
    if direction == "ascending":
        if literal:
            return base
        if p >= 1:
            return math.inf if base > 0 else 0.0
        return base / (2.0 * (1.0 - 2.0 ** (p - 1)))
    if literal:
        if p <= -1:
            return math.inf if base > 0 else 0.0
        r = 2.0 ** (-(1.0 + p))
        return 0.5 * base * r / (1.0 - r)
    if p <= 1:
        return math.inf if base > 0 else 0.0
    return base / (2.0 * (2.0 ** (p - 1) - 1.0))


def _partial_sums(phi, a, b, c, direction, literal, n_terms):
    a, b, c = (np.asarray(v, dtype=complex) for v in (a, b, c))
    start = 0 if direction == "ascending" else 1
    total = 0.0
    sums, terms = [], []
    run = 0
    for i in range(start, start + n_terms):
        try:
            if direction == "ascending":
                scale, coef = math.ldexp(1.0, i), math.ldexp(1.0, -i)
            else:
                scale = math.ldexp(1.0, -i)
                coef = math.ldexp(1.0, -i) if literal else math.ldexp(1.0, i)
            if literal and direction == "ascending":
                scale = 1.0
            term = 0.5 * coef * float(phi(scale * a, scale * b, scale * c))
        except OverflowError:
            return total, False, sums
        if not math.isfinite(term):
            return total, False, sums
        total += term
        sums.append(total)
        terms.append(term)
        if term <= STAGNATION_RTOL * abs(total) or (term == 0 and total == 0):
            run += 1
            if run >= STAGNATION_RUN:
                return total, True, sums
        else:
            run = 0
        # ratio test over the last ten terms
        if len(terms) > 20 and terms[-11] > 0:
            window = np.array(terms[-11:])
            if np.all(window[1:] >= window[:-1] * (1 - 1e-12)):
                return total, False, sums
    return total, False, sums


def tilde_phi(
    phi: ControlFunction,
    a,
    b,
    c,
    direction="ascending",
    n_terms=MAX_TERMS,
    *,
    literal=False,
    strict=True,
) -> SeriesResult:
    """Evaluate the weighted doubling series of ``phi`` at ``(a, b, c)``.

    Power and constant controls use the closed form, cross-checked against
    the partial sums.  ``literal=True`` switches to the unweighted
    variant (unscaled arguments ascending, ``2**-i`` coefficient
    descending), which does not bound the iteration and is kept for comparison.

    Raises :class:`DivergentSeries` (with the partial-sum trajectory) when the
    series is not summable and ``strict`` is set.
    """
    _check_direction(direction)
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    total, converged, sums = _partial_sums(phi, a, b, c, direction, literal, n_terms)
    closed = _closed_form(phi, a, b, c, direction, literal)
    if closed is not None:
        analytic_ok = math.isfinite(closed)
        if analytic_ok != converged and converged:
            log.warning("partial sums stagnated but closed form diverges")
        converged = analytic_ok
    result = SeriesResult(
        value=closed if closed is not None else total,
        converged=converged,
        n_terms=len(sums),
        partial_sums=sums,
        closed_form=closed,
    )
    if closed is not None and converged and sums:
        denom = max(abs(closed), 1e-300)
        result.crosscheck_error = abs(total - closed) / denom if closed != 0 else abs(total)
    if not converged:
        result.value = math.inf
        if strict:
            raise DivergentSeries(f"series is not summable ({direction}, kind={phi.kind}, p={phi.p})", sums)
    return result


def power_bound(theta, p, norm_a):
    """Closed-form bound ``theta ||a||^p / |1 - 2**(p-1)|`` for p != 1."""
    if p == 1:
        raise DivergentSeries("no bound exists for p = 1")
    return theta * norm_a**p / abs(1.0 - 2.0 ** (p - 1))


def rassias_bound(delta, p, norm_x):
    """``2 delta ||x||^p / |2^p - 2|`` for the two-term control ``delta(||x||^p + ||y||^p)``."""
    if p == 1:
        raise DivergentSeries("no bound exists for p = 1")
    return 2.0 * delta * norm_x**p / abs(2.0**p - 2.0)


# ---------------------------------------------------------------------------
# the iteration


@dataclass
class HyersResult:
    """Outcome of a doubling iteration.

    ``history[i, n-1]`` is ``||d_n(e_i) - d_{n-1}(e_i)||``; ``iterates[n]``
    stacks ``d_n(e_i)`` over the basis.
    """

    limit: LinearMap
    direction: str
    iterations_used: int
    history: np.ndarray
    iterates: np.ndarray = field(repr=False)
    step_bounds: np.ndarray | None = None
    cauchy_bound_check: float | None = None
    linearized: bool = False
    converged: bool = True

    def decay_slope(self, start=1, stop=None):
        """Least-squares slope of ``log2`` of the mean step size against n."""
        h = self.history[:, start - 1 : stop]
        mean = np.exp(np.mean(np.log(np.maximum(h, 1e-300)), axis=0))
        n = np.arange(start, start + mean.size)
        if mean.size < 2:
            return float("nan")
        return float(np.polyfit(n, np.log2(mean), 1)[0])

    def history_rows(self):
        """Rows ``(basis_index, n, distance, scaled_bound)``."""
        rows = []
        for i in range(self.history.shape[0]):
            for n in range(1, self.history.shape[1] + 1):
                bound = None if self.step_bounds is None else float(self.step_bounds[i, n - 1])
                rows.append((i, n, float(self.history[i, n - 1]), bound))
        return rows


def _step_bounds(phi, A, direction, n_steps):
    """One-step bound for the move from ``d_{n-1}`` to ``d_n`` at each basis element."""
    out = np.zeros((A.dim, n_steps))
    zero = np.zeros(A.dim, dtype=complex)
    for i in range(A.dim):
        e = A.basis_element(i)
        for n in range(1, n_steps + 1):
            if direction == "ascending":
                s = math.ldexp(1.0, n - 1)
                out[i, n - 1] = 0.5 * math.ldexp(1.0, -(n - 1)) * float(phi(s * e, s * e, zero))
            else:
                s = math.ldexp(1.0, -n)
                out[i, n - 1] = 0.5 * math.ldexp(1.0, n) * float(phi(s * e, s * e, zero))
    return out


def _cauchy_violation(iterates, step_bounds, norm):
    # iterates: (N+1, dimA, dimX); tail(m, n) = sum_{k=m+1}^{n} step_bounds[:, k-1]
    n_it = iterates.shape[0]
    cum = np.concatenate([np.zeros((step_bounds.shape[0], 1)), np.cumsum(step_bounds, axis=1)], axis=1)
    worst = -math.inf
    for m in range(n_it):
        for n in range(m + 1, n_it):
            dist = norm(iterates[n] - iterates[m])
            tail = cum[:, n] - cum[:, m]
            worst = max(worst, float(np.max(dist - tail)))
    return worst


def hyers_limit(
    f,
    direction="ascending",
    n_max=40,
    tol=1e-8,
    *,
    phi: ControlFunction | None = None,
    linearity_samples=64,
    seed=0,
) -> HyersResult:
    """Construct the exact additive map as the limit of the doubling iterates of ``f``.

    Iterates every basis element until all move less than
    ``tol * (1 + ||d_n(e_i)||)``, then assembles the matrix of the limit.

    Raises
    ------
    NoConvergence
        ``n_max`` reached with movement above tolerance.  The partial result
        is attached as ``exc.result``.
    IterationOverflow
        An iterate's norm exceeded 1e280.
    """
    _check_direction(direction)
    if not 1 <= n_max <= 50:
        raise ValueError("n_max must lie in [1, 50]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = f.algebra
    X = f.bimodule
    basis = np.eye(A.dim, dtype=complex)
    zero = f(np.zeros(A.dim, dtype=complex))
    if np.any(zero != 0):
        raise ValueError("f(0) must be 0")

    iterates = [f(basis)]
    steps = []
    converged = False
    n = 0
    for n in range(1, n_max + 1):
        if direction == "ascending":
            cur = math.ldexp(1.0, -n) * f(math.ldexp(1.0, n) * basis)
        else:
            cur = math.ldexp(1.0, n) * f(math.ldexp(1.0, -n) * basis)
        size = X.norm(cur)
        if not np.all(np.isfinite(size)) or np.any(size > OVERFLOW_LIMIT):
            raise IterationOverflow(f"iterate norm exceeded {OVERFLOW_LIMIT:g} at n={n} ({direction})")
        move = X.norm(cur - iterates[-1])
        iterates.append(cur)
        steps.append(move)
        if np.all(move < tol * (1 + size)):
            converged = True
            break

    iterates = np.array(iterates)
    history = np.array(steps).T
    limit = LinearMap(iterates[-1].T)
    bounds = cauchy = None
    if phi is not None:
        bounds = _step_bounds(phi, A, direction, n)
        cauchy = _cauchy_violation(iterates, bounds, X.norm)
    result = HyersResult(
        limit=limit,
        direction=direction,
        iterations_used=n,
        history=history,
        iterates=iterates,
        step_bounds=bounds,
        cauchy_bound_check=cauchy,
        converged=converged,
    )
    if not converged:
        raise NoConvergence(
            f"no convergence after {n_max} {direction} iterations (last movement {float(np.max(steps[-1])):.3e})",
            result,
        )
    report = c_linearity_report(limit, TorusSampler(seed=seed), linearity_samples, seed=seed, norm=X.norm)
    result.linearized = report.verdict
    return result


def extract_delta(g, direction="ascending", n_max=40, tol=1e-8, **kwargs) -> HyersResult:
    """Candidate Jordan derivation ``delta(c) = lim 2**-n g(2**n c)`` (same machinery as :func:`hyers_limit`)."""
    return hyers_limit(g, direction, n_max, tol, **kwargs)
