"""Exact solution spaces of derivation-type identities by linear algebra.

Every identity below is linear in the unknown map(s), so imposing it on
basis elements gives a homogeneous system whose null space is the
solution space.  The quadratic Jordan-type identities are imposed in
polarized form, e.g. for Jordan derivations

    D(e_i e_j + e_j e_i) = e_i D(e_j) + D(e_i) e_j + e_j D(e_i) + D(e_j) e_i,

which over C is equivalent to ``D(a^2) = a D(a) + D(a) a``.  Solutions are
re-checked against the unpolarized identity on random elements.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import Algebra, Bimodule
from .errors import RankUncertain
from .linmap import LinearMap

RANK_RTOL = 1e-8
AMBIGUOUS_BAND = (1e-10, 1e-6)
KINDS = (
    "derivation",
    "jordan_derivation",
    "generalized_derivation_pair",
    "generalized_jordan_pair",
    "right_multiplier",
)
PAIR_KINDS = ("generalized_derivation_pair", "generalized_jordan_pair")


@dataclass
class SolutionSpace:
    kind: str
    basis: list
    residual: float
    spectrum: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def is_pair(self) -> bool:
        return self.kind in PAIR_KINDS

    def coordinates(self):
        """Stacked vectorized basis, one row per element."""
        if not self.basis:
            return np.zeros((0, 0), dtype=complex)
        if self.is_pair:
            return np.array([np.concatenate([d.matrix.ravel(), dl.matrix.ravel()]) for d, dl in self.basis])
        return np.array([m.matrix.ravel() for m in self.basis])

    def membership_residual(self, element):
        """Relative distance of a map (or ``(d, delta)`` pair) from the span."""
        if self.is_pair:
            d, dl = element
            v = np.concatenate([np.ravel(d.matrix), np.ravel(dl.matrix)])
        else:
            v = np.ravel(element.matrix)
        scale = max(np.linalg.norm(v), 1.0)
        if not self.basis:
            return float(np.linalg.norm(v) / scale)
        q = _orthonormal_rows(self.coordinates())
        proj = q.T @ (q.conj() @ v)
        return float(np.linalg.norm(v - proj) / scale)

    def to_dict(self):
        def mat(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in m.matrix]

        if self.is_pair:
            basis = [{"d": mat(d), "delta": mat(dl)} for d, dl in self.basis]
        else:
            basis = [mat(m) for m in self.basis]
        return {
            "kind": self.kind,
            "dimension": self.dim,
            "basis": basis,
            "residual": self.residual,
            "spectrum": [float(s) for s in self.spectrum],
        }


# ---------------------------------------------------------------------------
# linear-system assembly


def _pairs(n, ordered):
    if ordered:
        return [(i, j) for i in range(n) for j in range(n)]
    return [(i, j) for i in range(n) for j in range(i, n)]


def _derivation_rows(A, X, D, Dl, jordan):
    """Residuals of ``D(ab) = a D(b) + Dl(a) b`` (or its polarized Jordan form)."""
    c = A.structure
    lam = X.left_matrices()
    rho = X.right_matrices()
    out = []
    for i, j in _pairs(A.dim, ordered=not jordan):
        if jordan:
            s = c[i, j] + c[j, i]
            r = D @ s - lam[i] @ D[:, j] - lam[j] @ D[:, i] - rho[j] @ Dl[:, i] - rho[i] @ Dl[:, j]
        else:
            r = D @ c[i, j] - lam[i] @ D[:, j] - rho[j] @ Dl[:, i]
        out.append(r)
    return np.concatenate(out)


def _residual_single(A, X, jordan):
    def f(D):
        return _derivation_rows(A, X, D, D, jordan)

    return f


def _residual_pair(A, X, jordan):
    nx, na = X.dim, A.dim

    def f(v):
        d = v[: nx * na].reshape(nx, na)
        dl = v[nx * na :].reshape(nx, na)
        return np.concatenate([_derivation_rows(A, X, d, dl, jordan), _derivation_rows(A, X, dl, dl, jordan)])

    return f


def _assemble(residual, n_unknowns, shape=None):
    cols = []
    for k in range(n_unknowns):
        e = np.zeros(n_unknowns, dtype=complex)
        e[k] = 1.0
        cols.append(residual(e.reshape(shape) if shape else e))
    return np.array(cols).T


def null_space(M, rtol=RANK_RTOL, band=AMBIGUOUS_BAND):
    """Orthonormal, canonically ordered basis (rows) of ``{v : M v = 0}``.

    Raises :class:`RankUncertain` if a singular value falls in the ambiguous band.
    """
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n, dtype=complex), np.zeros(0)
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0:
        return np.eye(n, dtype=complex), s
    rel = s / smax
    if np.any((rel >= band[0]) & (rel <= band[1])):
        raise RankUncertain(s, f"singular values {rel[(rel >= band[0]) & (rel <= band[1])]} in the ambiguous band")
    rank = int(np.sum(rel > rtol))
    basis = vh[rank:].conj()
    return _canonical_basis(basis), s


def _rref(B, tol=1e-9):
    B = B.astype(complex).copy()
    rows, cols = B.shape
    scale = np.abs(B).max() if B.size else 1.0
    r = 0
    for col in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(B[r:, col])))
        if abs(B[piv, col]) <= tol * scale:
            continue
        B[[r, piv]] = B[[piv, r]]
        B[r] /= B[r, col]
        for k in range(rows):
            if k != r:
                B[k] -= B[k, col] * B[r]
        r += 1
    return B[:r]


def _orthonormal_rows(B):
    q, r = np.linalg.qr(B.T)
    phase = np.diag(r) / np.where(np.abs(np.diag(r)) > 0, np.abs(np.diag(r)), 1)
    return (q * phase.conj()).T


def _canonical_basis(B):
    # RREF of a subspace is unique, so the result does not depend on the SVD's choice of basis
    if B.shape[0] == 0:
        return B
    return _orthonormal_rows(_rref(B))


# ---------------------------------------------------------------------------
# unpolarized re-verification


def _sample(A, n, seed):
    rng = np.random.default_rng(seed)
    return A.random_elements(rng, n, (1e-1, 1e1))


def _jordan_check(A, X, D, Dl, a):
    """``||D(a^2) - a D(a) - Dl(a) a|| / (1 + ||a||^2)`` for stacked ``a``."""
    lhs = A.square(a) @ D.T
    rhs = X.left_act(a, a @ D.T) + X.right_act(a @ Dl.T, a)
    return X.norm(lhs - rhs) / (1 + A.norm(a) ** 2)


def _product_check(A, X, D, Dl, a, b):
    lhs = A.mul(a, b) @ D.T
    rhs = X.left_act(a, b @ D.T) + X.right_act(a @ Dl.T, b)
    return X.norm(lhs - rhs) / (1 + A.norm(a) * A.norm(b))


def _verify(kind, A, X, basis, n_checks, seed):
    if not basis:
        return 0.0
    a = _sample(A, n_checks, seed)
    b = _sample(A, n_checks, seed + 1)
    worst = 0.0
    for elem in basis:
        if kind == "jordan_derivation":
            r = _jordan_check(A, X, elem.matrix, elem.matrix, a)
        elif kind == "derivation":
            r = _product_check(A, X, elem.matrix, elem.matrix, a, b)
        elif kind == "generalized_jordan_pair":
            d, dl = elem
            r = np.maximum(_jordan_check(A, X, d.matrix, dl.matrix, a), _jordan_check(A, X, dl.matrix, dl.matrix, a))
        elif kind == "generalized_derivation_pair":
            d, dl = elem
            r = np.maximum(
                _product_check(A, X, d.matrix, dl.matrix, a, b), _product_check(A, X, dl.matrix, dl.matrix, a, b)
            )
        else:
            r = _jordan_check(A, X, elem.matrix, np.zeros_like(elem.matrix), a)
        worst = max(worst, float(np.max(r)))
    return worst


# ---------------------------------------------------------------------------
# public solvers


def _solve(kind, A, X, n_checks=200, seed=0):
    X = X if X is not None else Bimodule.regular(A)
    nx, na = X.dim, A.dim
    if kind == "right_multiplier":
        basis = [right_multiplier(X, np.eye(nx)[k]) for k in range(nx)]
        vecs = _canonical_basis(np.array([m.matrix.ravel() for m in basis]))
        basis = [LinearMap(v.reshape(nx, na)) for v in vecs]
        return SolutionSpace(kind, basis, _verify(kind, A, X, basis, n_checks, seed), [])
    jordan = kind in ("jordan_derivation", "generalized_jordan_pair")
    if kind in PAIR_KINDS:
        M = _assemble(_residual_pair(A, X, jordan), 2 * nx * na)
        vecs, s = null_space(M)
        basis = [
            (LinearMap(v[: nx * na].reshape(nx, na)), LinearMap(v[nx * na :].reshape(nx, na))) for v in vecs
        ]
    elif kind in ("derivation", "jordan_derivation"):
        M = _assemble(_residual_single(A, X, jordan), nx * na, (nx, na))
        vecs, s = null_space(M)
        basis = [LinearMap(v.reshape(nx, na)) for v in vecs]
    else:
        raise ValueError(f"unknown solution kind {kind!r}; expected one of {KINDS}")
    return SolutionSpace(kind, basis, _verify(kind, A, X, basis, n_checks, seed), list(s))


def solve_derivations(A: Algebra, X: Bimodule | None = None) -> SolutionSpace:
    return _solve("derivation", A, X)


def solve_jordan_derivations(A: Algebra, X: Bimodule | None = None) -> SolutionSpace:
    """All linear ``D`` with ``D(a^2) = a D(a) + D(a) a``."""
    return _solve("jordan_derivation", A, X)


def solve_generalized_derivation_pairs(A: Algebra, X: Bimodule | None = None) -> SolutionSpace:
    return _solve("generalized_derivation_pair", A, X)


def solve_generalized_jordan_pairs(A: Algebra, X: Bimodule | None = None) -> SolutionSpace:
    """All pairs ``(d, delta)`` with ``d(a^2) = a d(a) + delta(a) a`` and delta a Jordan derivation."""
    return _solve("generalized_jordan_pair", A, X)


def solve_right_multipliers(A: Algebra, X: Bimodule | None = None) -> SolutionSpace:
    return _solve("right_multiplier", A, X)


def solve(A: Algebra, X: Bimodule | None, kind: str) -> SolutionSpace:
    return _solve(kind, A, X)


def solve_jordan_by_squares(A: Algebra, X: Bimodule | None = None, n_squares=None, seed=0):
    """Null-space dimension of the unpolarized condition imposed on random squares.

    Independent of the polarization argument; used to cross-check it.
    """
    X = X if X is not None else Bimodule.regular(A)
    nx, na = X.dim, A.dim
    n_squares = n_squares or 3 * na + 5
    a = _sample(A, n_squares, seed)
    a = a / A.norm(a)[:, None]
    a2 = A.square(a)

    def residual(D):
        return (a2 @ D.T - X.left_act(a, a @ D.T) - X.right_act(a @ D.T, a)).ravel()

    M = _assemble(residual, nx * na, (nx, na))
    vecs, s = null_space(M)
    return vecs.shape[0]


def inner_derivation(A: Algebra, x) -> LinearMap:
    """``a -> x a - a x``."""
    return LinearMap(A.left_matrix(x) - A.right_matrix(x))


def right_multiplier(X: Bimodule, x0) -> LinearMap:
    """``a -> a . x0``; a generalized (Jordan) derivation with ``delta = 0``."""
    x0 = np.asarray(x0, dtype=complex)
    return LinearMap(np.einsum("m,imk->ki", x0, X.left))


def proper_jordan_witness(A: Algebra, X: Bimodule | None = None):
    """A Jordan derivation that is not a derivation, or ``None`` if none exists."""
    jd = solve_jordan_derivations(A, X)
    der = solve_derivations(A, X)
    for m in jd.basis:
        if der.membership_residual(m) > 1e-8:
            return m
    return None
