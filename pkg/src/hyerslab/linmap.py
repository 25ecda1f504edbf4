"""Linear maps A -> X, perturbed maps under test, and the C-linearity check."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import Algebra, Bimodule
from .errors import DimensionMismatch, InvalidModel

LINEARITY_TOL = 1e-9
PERTURBATION_KINDS = ("none", "bounded", "power", "custom")
_QUANT_BITS = 40


@dataclass(frozen=True, eq=False)
class LinearMap:
    """C-linear map stored as a dense ``dim(X) x dim(A)`` matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-d, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def domain_dim(self):
        return self.matrix.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        if x.ndim == 0 or x.shape[-1] != self.domain_dim:
            raise DimensionMismatch(f"input has shape {x.shape}, map expects {self.domain_dim} coordinates")
        return x @ self.matrix.T

    def __add__(self, other):
        return LinearMap(self.matrix + other.matrix)

    def __sub__(self, other):
        return LinearMap(self.matrix - other.matrix)

    def __rmul__(self, scalar):
        return LinearMap(scalar * self.matrix)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def zero(cls, rows, cols=None):
        return cls(np.zeros((rows, rows if cols is None else cols)))


def apply(m, x):
    """Evaluate a :class:`LinearMap` or :class:`MapUnderTest` at ``x``."""
    return m(x)


@dataclass(frozen=True)
class PerturbationModel:
    kind: str = "none"
    theta: float = 0.0
    p: float = 0.0
    direction_seed: int = 0
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise InvalidModel(f"unknown perturbation kind {self.kind!r}")
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise InvalidModel(f"theta must be a finite nonnegative number, got {self.theta}")
        if self.kind == "custom" and self.func is None:
            raise InvalidModel("custom perturbation needs a callable")

    @property
    def growth_exponent(self):
        """Exponent of the magnitude envelope ``theta * ||x||**p`` (0 for bounded)."""
        if self.kind == "power":
            return float(self.p)
        if self.kind == "bounded":
            return 0.0
        return None

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta, "p": self.p, "direction_seed": self.direction_seed}

    @classmethod
    def from_dict(cls, data):
        if data is None:
            return cls()
        return cls(
            kind=data.get("kind", "none"),
            theta=float(data.get("theta", 0.0)),
            p=float(data.get("p", 0.0)),
            direction_seed=int(data.get("direction_seed", 0)),
        )


def _quantize(v):
    return int(round(math.ldexp(v, _QUANT_BITS)))


def hashed_gaussian(x, seed, dim):
    """Complex Gaussian vector that is a pure function of (quantized ``x``, ``seed``).

    Uses SHAKE-256 output fed through Box-Muller, so the value does not depend
    on numpy's generator algorithms or on evaluation order.
    """
    parts = []
    for z in np.asarray(x, dtype=complex).ravel():
        parts.append(_quantize(z.real))
        parts.append(_quantize(z.imag))
    payload = f"{seed}|{','.join(map(str, parts))}".encode()
    raw = hashlib.shake_256(payload).digest(16 * dim)
    u = (np.frombuffer(raw, dtype="<u8").astype(np.float64) + 0.5) / 2.0**64
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    g = radius * np.cos(angle) + 1j * radius * np.sin(angle)
    return g[:dim]


class MapUnderTest:
    """``f(x) = base(x) + eta(x)`` with ``eta`` a deterministic function of ``x``.

    The perturbation direction is hashed from ``x`` quantized at step
    ``2**-40`` and normalized in the norm of X; its size is ``theta``
    (bounded) or ``theta * ||x||**p`` (power).  ``eta(0) = 0`` always.
    """

    def __init__(self, base: LinearMap, model: PerturbationModel, algebra: Algebra, bimodule: Bimodule | None = None):
        self.base = base
        self.model = model
        self.algebra = algebra
        self.bimodule = bimodule if bimodule is not None else Bimodule.regular(algebra)
        if base.shape != (self.bimodule.dim, algebra.dim):
            raise DimensionMismatch(f"base map shape {base.shape} does not match dim X x dim A")

    def __repr__(self):
        return f"MapUnderTest(model={self.model!r}, shape={self.base.shape})"

    def perturbation(self, x):
        x = np.asarray(x, dtype=complex)
        if x.ndim == 0 or x.shape[-1] != self.algebra.dim:
            raise DimensionMismatch(f"input has shape {x.shape}, expected {self.algebra.dim} coordinates")
        single = x.ndim == 1
        rows = x.reshape(-1, self.algebra.dim)
        out = np.zeros((rows.shape[0], self.bimodule.dim), dtype=complex)
        kind = self.model.kind
        if kind == "none" or (kind != "custom" and self.model.theta == 0):
            return out[0] if single else out.reshape(x.shape[:-1] + (self.bimodule.dim,))
        nonzero = np.any(rows != 0, axis=1)
        if kind == "custom":
            for k in np.flatnonzero(nonzero):
                out[k] = self.model.func(rows[k])
        else:
            idx = np.flatnonzero(nonzero)
            if idx.size:
                dirs = np.array([hashed_gaussian(rows[k], self.model.direction_seed, self.bimodule.dim) for k in idx])
                dirs /= self.bimodule.norm(dirs)[:, None]
                mag = np.full(idx.size, self.model.theta)
                if kind == "power":
                    mag = mag * self.algebra.norm(rows[idx]) ** self.model.p
                out[idx] = dirs * mag[:, None]
        return out[0] if single else out.reshape(x.shape[:-1] + (self.bimodule.dim,))

    def __call__(self, x):
        return self.base(x) + self.perturbation(x)


def make_perturbed(base: LinearMap, model: PerturbationModel, algebra: Algebra, bimodule: Bimodule | None = None):
    if model.theta < 0:
        raise InvalidModel("theta must be nonnegative")
    return MapUnderTest(base, model, algebra, bimodule)


@dataclass(frozen=True)
class TorusSampler:
    """Stream of unit-modulus scalars.

    The stream opens with ``1, -1, i, -i`` and the ``grid_size``-th roots of
    unity, then continues with uniformly random angles drawn from ``seed``.
    """

    grid_size: int = 8
    seed: int = 0

    def fixed_points(self):
        special = [1.0 + 0j, -1.0 + 0j, 1j, -1j]
        k = np.arange(self.grid_size)
        roots = np.exp(2j * np.pi * k / self.grid_size)
        return np.concatenate([special, roots])

    def sample(self, n):
        head = self.fixed_points()
        if n <= head.size:
            return head[:n].copy()
        rng = np.random.default_rng(self.seed)
        tail = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n - head.size))
        return np.concatenate([head, tail])


@dataclass
class LinearityReport:
    max_additive: float
    additive_witness: tuple
    max_homogeneity: float
    homogeneity_witness: tuple
    tol: float
    verdict: bool
    alpha_residual: float | None
    n_samples: int

    def to_dict(self):
        return {
            "max_additive": self.max_additive,
            "max_homogeneity": self.max_homogeneity,
            "tol": self.tol,
            "verdict": self.verdict,
            "alpha_residual": self.alpha_residual,
            "n_samples": self.n_samples,
        }


def homogeneity_defect(m, x, lam, norm=None):
    """``||m(lam x) - lam m(x)||``."""
    norm = norm or _default_norm(m)
    x = np.asarray(x, dtype=complex)
    return norm(np.atleast_1d(m(lam * x) - lam * m(x)))


def _default_norm(m):
    if isinstance(m, MapUnderTest):
        return m.bimodule.norm
    return lambda v: np.linalg.norm(v, axis=-1)


def _evaluate_rows(m, rows):
    if isinstance(m, (LinearMap, MapUnderTest)):
        return m(rows)
    return np.array([m(r) for r in rows])


def c_linearity_report(m, sampler: TorusSampler, n_samples: int, *, dim=None, tol=LINEARITY_TOL, seed=0, norm=None):
    """Empirical check of additivity and T^1-homogeneity.

    When both defects are within ``tol`` the map is C-linear by the
    additivity + unit-circle homogeneity argument; the residual at random
    complex scalars is then reported as a consistency check.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if dim is None:
        if isinstance(m, LinearMap):
            dim = m.domain_dim
        elif isinstance(m, MapUnderTest):
            dim = m.algebra.dim
        else:
            raise ValueError("dim is required for plain callables")
    norm = norm or _default_norm(m)
    rng = np.random.default_rng(seed)

    def draw(k):
        return rng.standard_normal((k, dim)) + 1j * rng.standard_normal((k, dim))

    x, y = draw(n_samples), draw(n_samples)
    lam = sampler.sample(n_samples)
    add = norm(_evaluate_rows(m, x + y) - _evaluate_rows(m, x) - _evaluate_rows(m, y))
    hom = norm(_evaluate_rows(m, lam[:, None] * x) - lam[:, None] * _evaluate_rows(m, x))
    ia, ih = int(np.argmax(add)), int(np.argmax(hom))
    verdict = bool(add[ia] <= tol and hom[ih] <= tol)
    alpha_res = None
    if verdict:
        alpha = rng.standard_normal(n_samples) * 10 + 1j * rng.standard_normal(n_samples) * 10
        alpha_res = float(norm(_evaluate_rows(m, alpha[:, None] * x) - alpha[:, None] * _evaluate_rows(m, x)).max())
    return LinearityReport(
        max_additive=float(add[ia]),
        additive_witness=(x[ia], y[ia]),
        max_homogeneity=float(hom[ih]),
        homogeneity_witness=(x[ih], lam[ih]),
        tol=tol,
        verdict=verdict,
        alpha_residual=alpha_res,
        n_samples=n_samples,
    )
