"""Finite-dimensional unital algebras over C and their bimodules.

An algebra of dimension ``n`` is stored by its structure constants
``c[i, j, k]``, meaning ``e_i e_j = sum_k c[i, j, k] e_k``.  Elements are
coordinate vectors; every routine accepts a single vector of shape ``(n,)``
or a stack of shape ``(m, n)``.

The default norm is the operator norm of the left-regular representation
``x -> L_x``.  Since ``L_{xy} = L_x L_y`` for an associative algebra this norm
is submultiplicative and gives ``||1|| = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import AssociativityViolation, DimensionMismatch, MissingUnit

AXIOM_TOL = 1e-12
NORM_KINDS = ("operator", "entrywise_max", "weighted")


def _frozen(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _check_elements(x, dim, what="element"):
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0 or x.shape[-1] != dim:
        raise DimensionMismatch(f"{what} has shape {x.shape}, expected trailing dimension {dim}")
    return x


@dataclass(frozen=True, eq=False)
class Algebra:
    structure: np.ndarray
    unit: np.ndarray
    norm_kind: str = "operator"
    basis: tuple = ()
    weights: np.ndarray | None = None
    _norm_scale: float = field(init=False, repr=False, default=1.0)

    def __post_init__(self):
        c = _frozen(self.structure)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise DimensionMismatch(f"structure tensor must be (n, n, n), got {c.shape}")
        n = c.shape[0]
        u = _frozen(self.unit)
        if u.shape != (n,):
            raise DimensionMismatch(f"unit has shape {u.shape}, expected ({n},)")
        if self.norm_kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.norm_kind!r}")
        object.__setattr__(self, "structure", c)
        object.__setattr__(self, "unit", u)
        basis = tuple(self.basis) or tuple(f"e{i}" for i in range(n))
        if len(basis) != n:
            raise DimensionMismatch(f"{len(basis)} basis labels for dimension {n}")
        object.__setattr__(self, "basis", basis)

        absc = np.abs(c)
        if self.norm_kind == "entrywise_max":
            # gamma * max|x_k| with gamma = max_k sum_ij |c_ijk| is submultiplicative
            scale = max(float(absc.sum(axis=(0, 1)).max()), 1.0)
        elif self.norm_kind == "weighted":
            w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
            if w.shape != (n,) or np.any(w <= 0):
                raise ValueError("weights must be n positive numbers")
            object.__setattr__(self, "weights", w)
            # gamma * sum_k w_k |x_k|, gamma = max_ij sum_k w_k |c_ijk| / (w_i w_j)
            ratio = np.einsum("ijk,k->ij", absc, w) / np.outer(w, w)
            scale = max(float(ratio.max()), 1.0)
        else:
            scale = 1.0
        object.__setattr__(self, "_norm_scale", scale)

    @property
    def dim(self) -> int:
        return self.structure.shape[0]

    def mul(self, x, y):
        """Product ``x y`` by contraction against the structure tensor."""
        x = _check_elements(x, self.dim)
        y = _check_elements(y, self.dim)
        return np.einsum("...i,...j,ijk->...k", x, y, self.structure)

    def left_matrix(self, x):
        """Matrix of ``y -> x y`` acting on coordinate columns."""
        x = _check_elements(x, self.dim)
        return np.einsum("...i,ijk->...kj", x, self.structure)

    def right_matrix(self, x):
        """Matrix of ``y -> y x``."""
        x = _check_elements(x, self.dim)
        return np.einsum("...j,ijk->...ki", x, self.structure)

    def norm(self, x):
        x = _check_elements(x, self.dim)
        if self.norm_kind == "operator":
            return np.linalg.svd(self.left_matrix(x), compute_uv=False)[..., 0]
        if self.norm_kind == "entrywise_max":
            return self._norm_scale * np.abs(x).max(axis=-1)
        return self._norm_scale * (np.abs(x) * self.weights).sum(axis=-1)

    def square(self, x):
        return self.mul(x, x)

    def basis_element(self, i):
        e = np.zeros(self.dim, dtype=complex)
        e[i] = 1.0
        return e

    def random_elements(self, rng, n, norm_range=(1e-2, 1e2)):
        """Complex Gaussian directions rescaled to log-uniform norms in ``norm_range``."""
        z = rng.standard_normal((n, self.dim)) + 1j * rng.standard_normal((n, self.dim))
        lo, hi = np.log10(norm_range[0]), np.log10(norm_range[1])
        target = 10.0 ** rng.uniform(lo, hi, size=n)
        return z * (target / self.norm(z))[:, None]


@dataclass(frozen=True, eq=False)
class Bimodule:
    """A-bimodule given by action tensors.

    ``left[i, j, k]`` is the coefficient of ``x_k`` in ``e_i . x_j``;
    ``right[j, i, k]`` the coefficient of ``x_k`` in ``x_j . e_i``.
    ``norm_kind="algebra"`` reuses the algebra's norm (only for ``X = A``).
    """

    algebra: Algebra
    left: np.ndarray
    right: np.ndarray
    norm_kind: str = "algebra"

    def __post_init__(self):
        l = _frozen(self.left)
        r = _frozen(self.right)
        n = self.algebra.dim
        if l.ndim != 3 or l.shape[0] != n or l.shape[1] != l.shape[2]:
            raise DimensionMismatch(f"left action has shape {l.shape}")
        m = l.shape[1]
        if r.shape != (m, n, m):
            raise DimensionMismatch(f"right action has shape {r.shape}, expected {(m, n, m)}")
        if self.norm_kind == "algebra" and m != n:
            raise DimensionMismatch("norm_kind 'algebra' requires dim X == dim A")
        if self.norm_kind not in ("algebra", "euclidean"):
            raise ValueError(f"unknown bimodule norm kind {self.norm_kind!r}")
        object.__setattr__(self, "left", l)
        object.__setattr__(self, "right", r)

    @classmethod
    def regular(cls, algebra: Algebra) -> "Bimodule":
        """``X = A`` with multiplication as both actions."""
        c = algebra.structure
        return cls(algebra, c, c, "algebra")

    @property
    def dim(self) -> int:
        return self.left.shape[1]

    def left_act(self, a, x):
        a = _check_elements(a, self.algebra.dim, "algebra element")
        x = _check_elements(x, self.dim, "module element")
        return np.einsum("...i,...j,ijk->...k", a, x, self.left)

    def right_act(self, x, a):
        x = _check_elements(x, self.dim, "module element")
        a = _check_elements(a, self.algebra.dim, "algebra element")
        return np.einsum("...j,...i,jik->...k", x, a, self.right)

    def norm(self, x):
        x = _check_elements(x, self.dim, "module element")
        if self.norm_kind == "algebra":
            return self.algebra.norm(x)
        return np.linalg.norm(x, axis=-1)

    def left_matrices(self):
        """``Lam[i]`` with ``Lam[i] @ x == e_i . x``."""
        return np.transpose(self.left, (0, 2, 1))

    def right_matrices(self):
        """``P[i]`` with ``P[i] @ x == x . e_i``."""
        return np.transpose(self.right, (1, 2, 0))


# ---------------------------------------------------------------------------
# validation


@dataclass
class Violation:
    name: str
    residual: float
    witness: tuple

    def to_dict(self):
        return {"name": self.name, "residual": float(self.residual), "witness": list(self.witness)}


@dataclass
class ViolationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def names(self):
        return [v.name for v in self.violations]

    def to_dict(self):
        return {"valid": self.ok, "violations": [v.to_dict() for v in self.violations]}


def _worst(residual):
    idx = np.unravel_index(int(np.argmax(residual)), residual.shape)
    return float(residual[idx]), tuple(int(i) for i in idx)


def _associativity_residual(c):
    lhs = np.einsum("ijk,klm->ijlm", c, c)
    rhs = np.einsum("jlk,ikm->ijlm", c, c)
    return np.abs(lhs - rhs).max(axis=-1)


def _sampled_submultiplicativity(algebra, n_pairs, seed):
    rng = np.random.default_rng(seed)
    x = algebra.random_elements(rng, n_pairs, (1e-1, 1e1))
    y = algebra.random_elements(rng, n_pairs, (1e-1, 1e1))
    excess = algebra.norm(algebra.mul(x, y)) - algebra.norm(x) * algebra.norm(y)
    k = int(np.argmax(excess))
    return float(excess[k]), (k,)


def validate(obj, tol=AXIOM_TOL, n_pairs=1000, seed=0) -> ViolationReport:
    """Check every axiom of an :class:`Algebra` or :class:`Bimodule`.

    Violations are returned as data; nothing is raised.
    """
    if isinstance(obj, Bimodule):
        return _validate_bimodule(obj, tol, n_pairs, seed)
    report = ViolationReport()
    c = obj.structure
    n = obj.dim
    res, where = _worst(_associativity_residual(c))
    if res > tol:
        report.violations.append(Violation("associativity", res, where))
    eye = np.eye(n)
    left_unit = np.abs(np.einsum("i,ijk->jk", obj.unit, c) - eye)
    right_unit = np.abs(np.einsum("j,ijk->ik", obj.unit, c) - eye)
    res, where = _worst(np.maximum(left_unit, right_unit))
    if res > tol:
        report.violations.append(Violation("unit", res, where))
    unit_norm = float(obj.norm(obj.unit))
    if unit_norm < 1 - tol or (obj.norm_kind == "operator" and abs(unit_norm - 1) > 1e-9):
        report.violations.append(Violation("unit_norm", abs(unit_norm - 1), ()))
    if report.ok:
        excess, where = _sampled_submultiplicativity(obj, n_pairs, seed)
        if excess > 1e-10:
            report.violations.append(Violation("submultiplicativity", excess, where))
    return report


def _validate_bimodule(X, tol, n_pairs, seed):
    report = ViolationReport()
    A = X.algebra
    c, l, r = A.structure, X.left, X.right
    checks = {
        # (e_i e_j) x_m = e_i (e_j x_m)
        "left_module": np.einsum("ijk,kmn->ijmn", c, l) - np.einsum("jmp,ipn->ijmn", l, l),
        # x_m (e_i e_j) = (x_m e_i) e_j
        "right_module": np.einsum("ijk,mkn->ijmn", c, r) - np.einsum("mip,pjn->ijmn", r, r),
        # (e_i x_m) e_j = e_i (x_m e_j)
        "bimodule_compatibility": np.einsum("imp,pjn->ijmn", l, r) - np.einsum("mjp,ipn->ijmn", r, l),
    }
    for name, diff in checks.items():
        res, where = _worst(np.abs(diff).max(axis=-1))
        if res > tol:
            report.violations.append(Violation(name, res, where))
    eye = np.eye(X.dim)
    lu = np.abs(np.einsum("i,ijk->jk", A.unit, l) - eye)
    ru = np.abs(np.einsum("i,jik->jk", A.unit, r) - eye)
    res, where = _worst(np.maximum(lu, ru))
    if res > tol:
        report.violations.append(Violation("unit_linked", res, where))
    if report.ok:
        rng = np.random.default_rng(seed)
        a = A.random_elements(rng, n_pairs, (1e-1, 1e1))
        x = rng.standard_normal((n_pairs, X.dim)) + 1j * rng.standard_normal((n_pairs, X.dim))
        bound = A.norm(a) * X.norm(x)
        excess = np.maximum(X.norm(X.left_act(a, x)), X.norm(X.right_act(x, a))) - bound
        k = int(np.argmax(excess))
        if excess[k] > 1e-10 * (1 + bound[k]):
            report.violations.append(Violation("action_norm", float(excess[k]), (k,)))
    return report


# ---------------------------------------------------------------------------
# construction from specs


def matrix_algebra(n: int, norm="operator") -> Algebra:
    """M_n(C) on matrix units ``E_ij`` in row-major order."""
    d = n * n
    c = np.zeros((d, d, d))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                # E_ij E_jk = E_ik
                c[i * n + j, j * n + k, i * n + k] = 1.0
    unit = np.eye(n).ravel()
    labels = tuple(f"E{i + 1}{j + 1}" for i in range(n) for j in range(n))
    return Algebra(c, unit, norm, labels)


def upper_triangular_algebra(n: int, norm="operator") -> Algebra:
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    index = {p: t for t, p in enumerate(pairs)}
    d = len(pairs)
    c = np.zeros((d, d, d))
    for (i, j), s in index.items():
        for (j2, k), t in index.items():
            if j2 == j:
                c[s, t, index[(i, k)]] = 1.0
    unit = np.zeros(d)
    for i in range(n):
        unit[index[(i, i)]] = 1.0
    labels = tuple(f"E{i + 1}{j + 1}" for i, j in pairs)
    return Algebra(c, unit, norm, labels)


def dual_numbers(norm="operator") -> Algebra:
    c = np.zeros((2, 2, 2))
    c[0, 0, 0] = c[0, 1, 1] = c[1, 0, 1] = 1.0
    return Algebra(c, [1.0, 0.0], norm, ("1", "eps"))


def direct_sum(first: Algebra, second: Algebra, norm="operator") -> Algebra:
    n1, n2 = first.dim, second.dim
    c = np.zeros((n1 + n2,) * 3, dtype=complex)
    c[:n1, :n1, :n1] = first.structure
    c[n1:, n1:, n1:] = second.structure
    unit = np.concatenate([first.unit, second.unit])
    labels = tuple(f"L.{b}" for b in first.basis) + tuple(f"R.{b}" for b in second.basis)
    return Algebra(c, unit, norm, labels)


def derive_unit(structure, tol=AXIOM_TOL):
    """Solve ``u e_i = e_i u = e_i`` for ``u``; raise :class:`MissingUnit` if impossible."""
    c = np.asarray(structure, dtype=complex)
    n = c.shape[0]
    # rows: (j, k) for u e_j, then (i, k) for e_i u
    left = np.transpose(c, (1, 2, 0)).reshape(n * n, n)
    right = np.transpose(c, (0, 2, 1)).reshape(n * n, n)
    system = np.vstack([left, right])
    rhs = np.concatenate([np.eye(n).ravel(), np.eye(n).ravel()])
    u, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    if np.abs(system @ u - rhs).max() > 1e-9:
        raise MissingUnit("no two-sided unit exists for these structure constants")
    return np.where(np.abs(u) < tol, 0, u)


def _parse_complex(pair):
    if isinstance(pair, (int, float)):
        return complex(pair)
    re, im = pair
    return complex(re, im)


def algebra_from_spec(spec: Mapping[str, Any]) -> Algebra:
    """Build an :class:`Algebra` from a JSON-style spec without validating it."""
    spec = dict(spec)
    norm = spec.get("norm", "operator")
    kind = spec.get("kind")
    if kind is not None:
        if kind in ("matrix", "complex"):
            alg = matrix_algebra(int(spec.get("n", 1)), norm)
        elif kind == "upper_triangular":
            alg = upper_triangular_algebra(int(spec["n"]), norm)
        elif kind == "dual_numbers":
            alg = dual_numbers(norm)
        elif kind == "direct_sum":
            first, second = spec["summands"]
            alg = direct_sum(algebra_from_spec(first), algebra_from_spec(second), norm)
        else:
            raise ValueError(f"unknown algebra kind {kind!r}")
        if norm == "weighted":
            alg = Algebra(alg.structure, alg.unit, norm, alg.basis, spec.get("weights"))
        return alg

    dim = int(spec["dim"])
    c = np.zeros((dim, dim, dim), dtype=complex)
    for entry in spec.get("structure", []):
        i, j, k = (int(t) for t in entry[:3])
        if not all(0 <= t < dim for t in (i, j, k)):
            raise DimensionMismatch(f"structure entry {entry} out of range for dim {dim}")
        re, im = (entry[3], entry[4]) if len(entry) > 4 else (entry[3], 0.0)
        c[i, j, k] += complex(re, im)
    basis = tuple(spec.get("basis", ()))
    if basis and len(basis) != dim:
        raise DimensionMismatch(f"{len(basis)} basis labels for dim {dim}")
    if "unit" in spec and spec["unit"] is not None:
        unit = np.array([_parse_complex(p) for p in spec["unit"]])
        if unit.shape != (dim,):
            raise DimensionMismatch(f"unit has {unit.size} entries for dim {dim}")
    else:
        unit = derive_unit(c)
    return Algebra(c, unit, norm, basis, spec.get("weights"))


def make_algebra(spec: Mapping[str, Any] | Algebra, tol=AXIOM_TOL) -> Algebra:
    """Build and validate an algebra.

    Raises
    ------
    AssociativityViolation
        With the worst offending basis triple and its residual.
    MissingUnit
        If no unit is given and none can be derived, or the given one fails.
    DimensionMismatch
        On inconsistent sizes in the description.
    """
    alg = spec if isinstance(spec, Algebra) else algebra_from_spec(spec)
    res, where = _worst(_associativity_residual(alg.structure))
    if res > tol:
        raise AssociativityViolation(res, where)
    report = validate(alg, tol)
    for v in report.violations:
        if v.name in ("unit", "unit_norm"):
            raise MissingUnit(f"declared unit fails the unit axioms (residual {v.residual:.3e})")
    if not report.ok:
        raise ValueError(f"algebra failed validation: {report.names()}")
    return alg


def bimodule_from_spec(algebra: Algebra, spec) -> Bimodule:
    if spec is None or spec == "self":
        return Bimodule.regular(algebra)
    left = np.asarray(spec["left"], dtype=float)
    right = np.asarray(spec["right"], dtype=float)
    if left.shape[-1] == 2 and left.ndim == 4:
        left = left[..., 0] + 1j * left[..., 1]
        right = right[..., 0] + 1j * right[..., 1]
    return Bimodule(algebra, left, right, spec.get("norm", "euclidean"))


def algebra_to_spec(algebra: Algebra) -> dict:
    """Explicit JSON-style spec (sparse structure quintuples)."""
    idx = np.argwhere(algebra.structure != 0)
    structure = [
        [int(i), int(j), int(k), float(algebra.structure[i, j, k].real), float(algebra.structure[i, j, k].imag)]
        for i, j, k in idx
    ]
    return {
        "dim": algebra.dim,
        "basis": list(algebra.basis),
        "structure": structure,
        "unit": [[float(z.real), float(z.imag)] for z in algebra.unit],
        "norm": algebra.norm_kind,
    }
