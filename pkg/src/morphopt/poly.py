"""Sparse multivariate polynomial arithmetic.

Polynomials are stored as a map from exponent tuples to float coefficients,
e.g. 1 - x0^2 - x1^2 in two variables is {(0,0): 1.0, (2,0): -1.0, (0,2): -1.0}.
On top of the ring operations this module provides the pieces the set
homotopies are built from: homogenization, the Renegar derivative, the
smoothing operator p + eps * d_R p, restriction to a line through the origin,
companion-matrix root finding with a real-rootedness test, determinants of
linear symmetric matrix pencils, and the dehomogenized elementary symmetric
polynomials together with membership tests for their rigidly convex sets.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .errors import BudgetExceededError

# Relative magnitude below which a coefficient is considered arithmetic noise
# and dropped after every ring operation.
COEFF_DROP = 1e-14

# Symbolic determinant expansion budget (matrix size and variable count).
PENCIL_MAX_SIZE = 8
PENCIL_MAX_VARS = 8


def _normalize(n_vars: int, terms: Mapping[tuple, float]) -> dict:
    out = {}
    if not terms:
        return out
    cut = COEFF_DROP * max(abs(c) for c in terms.values())
    for exp, coeff in terms.items():
        exp = tuple(int(e) for e in exp)
        if len(exp) != n_vars:
            raise ValueError(f"exponent vector {exp} has length {len(exp)}, expected {n_vars}")
        if any(e < 0 for e in exp):
            raise ValueError(f"negative exponent in {exp}")
        c = float(coeff)
        if c == 0.0 or abs(c) <= cut:
            continue
        out[exp] = c
    return out


class MultiPoly:
    """Sparse polynomial in ``n_vars`` real variables."""

    __slots__ = ("n_vars", "terms", "_program")

    def __init__(self, n_vars: int, terms: Mapping[tuple, float] | None = None):
        if n_vars < 0:
            raise ValueError("n_vars must be nonnegative")
        self.n_vars = int(n_vars)
        self.terms = _normalize(self.n_vars, terms or {})
        self._program = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, n_vars: int, value: float) -> "MultiPoly":
        return cls(n_vars, {(0,) * n_vars: value})

    @classmethod
    def variable(cls, n_vars: int, index: int) -> "MultiPoly":
        if not 0 <= index < n_vars:
            raise ValueError(f"variable index {index} out of range for {n_vars} variables")
        exp = [0] * n_vars
        exp[index] = 1
        return cls(n_vars, {tuple(exp): 1.0})

    # -- basic queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Maximum total degree of the stored terms (0 for the zero polynomial)."""
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def __repr__(self):
        return f"MultiPoly(n_vars={self.n_vars}, terms={len(self.terms)}, degree={self.degree()})"

    def __eq__(self, other):
        return (
            isinstance(other, MultiPoly)
            and self.n_vars == other.n_vars
            and self.terms == other.terms
        )

    # -- ring operations -----------------------------------------------------

    def _check_same_space(self, other: "MultiPoly"):
        if self.n_vars != other.n_vars:
            raise ValueError("polynomials live in different variable spaces")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.n_vars, other)
        self._check_same_space(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return MultiPoly(self.n_vars, out)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.n_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.n_vars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            if other == 0:
                return MultiPoly(self.n_vars)
            return MultiPoly(self.n_vars, {e: c * other for e, c in self.terms.items()})
        self._check_same_space(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return MultiPoly(self.n_vars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = MultiPoly.constant(self.n_vars, 1.0)
        for _ in range(k):
            out = out * self
        return out

    # -- evaluation ----------------------------------------------------------

    def _prog(self) -> "_EvalProgram":
        if self._program is None:
            self._program = _EvalProgram(self.n_vars, self.terms)
        return self._program

    def eval(self, x) -> float:
        """Evaluate at a point: sum of coeff * prod x_i^{e_i}."""
        x = _as_point(x, self.n_vars)
        return self._prog().value(x)

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at many points; ``points`` has shape (N, n_vars)."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.n_vars:
            raise ValueError(f"expected points of shape (N, {self.n_vars})")
        return self._prog().value_many(points)

    def grad(self, x) -> np.ndarray:
        """Gradient by exact term-wise differentiation, then evaluation."""
        x = _as_point(x, self.n_vars)
        return self._prog().bundle(x)[1]

    def hessian(self, x) -> np.ndarray:
        """Hessian, symmetric by construction."""
        x = _as_point(x, self.n_vars)
        return self._prog().bundle(x)[2]

    def eval_bundle(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        """(value, gradient, Hessian) in one pass."""
        x = _as_point(x, self.n_vars)
        return self._prog().bundle(x)

    # -- calculus ------------------------------------------------------------

    def derivative(self, index: int) -> "MultiPoly":
        """Partial derivative with respect to variable ``index``."""
        if not 0 <= index < self.n_vars:
            raise ValueError("variable index out of range")
        out = {}
        for e, c in self.terms.items():
            k = e[index]
            if k == 0:
                continue
            ne = list(e)
            ne[index] = k - 1
            out[tuple(ne)] = out.get(tuple(ne), 0.0) + c * k
        return MultiPoly(self.n_vars, out)

    def homogenize(self) -> "MultiPoly":
        """Homogenize by a fresh variable 0: x0^d * p(x / x0), d = degree(p)."""
        if self.is_zero():
            raise ValueError("cannot homogenize the zero polynomial")
        d = self.degree()
        out = {}
        for e, c in self.terms.items():
            out[(d - sum(e),) + e] = c
        return MultiPoly(self.n_vars + 1, out)

    def renegar_derivative(self, degree: int | None = None) -> "MultiPoly":
        """Partial of the homogenization in the homogenizing variable, at x0 = 1.

        Term-wise this is (d - |e|) * c_e * x^e.  ``degree`` overrides the
        formal degree d; iterated applications must pass d-1, d-2, ... because
        the stored degree of the result can drop by more than one.
        """
        if self.is_zero():
            raise ValueError("cannot take the Renegar derivative of the zero polynomial")
        d = self.degree() if degree is None else int(degree)
        if d < self.degree():
            raise ValueError("formal degree below actual degree")
        out = {}
        for e, c in self.terms.items():
            w = d - sum(e)
            if w:
                out[e] = c * w
        return MultiPoly(self.n_vars, out)

    def smooth(self, eps: float) -> "MultiPoly":
        """Smoothing operator p + eps * d_R p; eps = 0 returns p unchanged."""
        if eps < 0:
            raise ValueError("smoothing parameter must be nonnegative")
        if eps == 0:
            return self
        return self + self.renegar_derivative() * eps

    def restrict(self, direction) -> "UniPoly":
        """Univariate restriction s -> p(s * direction)."""
        x = _as_point(direction, self.n_vars)
        if not np.any(x):
            raise ValueError("restriction direction must be nonzero")
        coeffs = np.zeros(self.degree() + 1)
        for e, c in self.terms.items():
            coeffs[sum(e)] += c * float(np.prod(x ** np.array(e)))
        return UniPoly(coeffs)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "terms": [
                {"exp": list(e), "coeff": c} for e, c in sorted(self.terms.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MultiPoly":
        terms = {tuple(t["exp"]): t["coeff"] for t in obj["terms"]}
        return cls(obj["n_vars"], terms)


def _as_point(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a point of length {n}, got shape {x.shape}")
    return x


class _EvalProgram:
    """Matrix form of a sparse polynomial for vectorized evaluation.

    Rows of E are exponent vectors, c the coefficients.  Derivative values are
    assembled from prefix/suffix products of the per-variable power factors,
    which avoids divisions (and so stays exact at points with zero
    coordinates).
    """

    def __init__(self, n_vars: int, terms: Mapping[tuple, float]):
        self.n = n_vars
        m = len(terms)
        items = list(terms.items())
        self.E = np.array([e for e, _ in items], dtype=np.int64).reshape(m, n_vars)
        self.c = np.array([c for _, c in items], dtype=float)
        self.max_deg = int(self.E.max()) if m and n_vars else 0
        self.E1 = np.maximum(self.E - 1, 0)
        self.E2 = np.maximum(self.E - 2, 0)
        self.F1 = self.E.astype(float)
        self.F2 = (self.E * (self.E - 1)).astype(float)

    def _pow_table(self, x: np.ndarray) -> np.ndarray:
        pows = np.ones((self.max_deg + 1, self.n))
        if self.max_deg >= 1:
            pows[1:] = x
            np.cumprod(pows[1:], axis=0, out=pows[1:])
        return pows

    def value(self, x: np.ndarray) -> float:
        if self.c.size == 0:
            return 0.0
        if self.n == 0:
            return float(self.c.sum())
        pw = self._pow_table(x)[self.E, np.arange(self.n)]
        return float(self.c @ pw.prod(axis=1))

    def value_many(self, X: np.ndarray) -> np.ndarray:
        N = X.shape[0]
        if self.c.size == 0 or N == 0:
            return np.zeros(N)
        out = np.empty(N)
        # chunk so the (chunk, m, n) intermediate stays small
        chunk = max(1, int(2e7) // max(1, self.c.size * max(self.n, 1)))
        for lo in range(0, N, chunk):
            hi = min(N, lo + chunk)
            mono = np.prod(X[lo:hi, None, :] ** self.E[None, :, :], axis=2)
            out[lo:hi] = mono @ self.c
        return out

    def bundle(self, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        n = self.n
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        m = self.c.size
        if m == 0:
            return 0.0, grad, hess
        cols = np.arange(n)
        pows = self._pow_table(x)
        pw = pows[self.E, cols]
        d1 = self.F1 * pows[self.E1, cols]
        d2 = self.F2 * pows[self.E2, cols]
        pre = np.ones((m, n))
        acc = np.ones(m)
        for i in range(1, n):
            acc = acc * pw[:, i - 1]
            pre[:, i] = acc
        suf = np.ones((m, n))
        acc = np.ones(m)
        for i in range(n - 2, -1, -1):
            acc = acc * pw[:, i + 1]
            suf[:, i] = acc
        value = float(self.c @ (pre[:, -1] * pw[:, -1]))
        base = pre * suf
        cd1 = self.c[:, None] * d1
        grad = (cd1 * base).sum(axis=0)
        hess[cols, cols] = (self.c[:, None] * d2 * base).sum(axis=0)
        for i in range(n):
            mid = np.ones(m)
            for j in range(i + 1, n):
                hij = float((cd1[:, i] * d1[:, j] * pre[:, i] * mid * suf[:, j]).sum())
                hess[i, j] = hij
                hess[j, i] = hij
                mid = mid * pw[:, j]
        return value, grad, hess


# -- univariate polynomials ----------------------------------------------------


class UniPoly:
    """Univariate polynomial, coefficients in ascending degree order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[float]):
        c = np.asarray(list(coeffs), dtype=float)
        if c.ndim != 1:
            raise ValueError("coefficients must be a flat sequence")
        if c.size:
            cut = COEFF_DROP * np.max(np.abs(c))
            c = np.where(np.abs(c) <= cut, 0.0, c)
            nz = np.nonzero(c)[0]
            c = c[: nz[-1] + 1] if nz.size else np.zeros(0)
        self.coeffs = c

    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    def degree(self) -> int:
        return max(self.coeffs.size - 1, 0)

    def __call__(self, s: float) -> float:
        if self.is_zero():
            return 0.0
        return float(np.polynomial.polynomial.polyval(s, self.coeffs))

    def derivative(self) -> "UniPoly":
        if self.coeffs.size <= 1:
            return UniPoly([])
        k = np.arange(1, self.coeffs.size)
        return UniPoly(self.coeffs[1:] * k)

    def companion_matrix(self) -> np.ndarray:
        """Companion matrix of the monic normalization."""
        if self.degree() < 1:
            raise ValueError("companion matrix needs degree >= 1")
        monic = self.coeffs / self.coeffs[-1]
        d = self.degree()
        mat = np.zeros((d, d))
        mat[1:, :-1] = np.eye(d - 1)
        mat[:, -1] = -monic[:-1]
        return mat

    def roots(self) -> np.ndarray:
        """All complex roots via the (balanced) companion-matrix eigenvalues."""
        if self.is_zero():
            raise ValueError("the zero polynomial has no well-defined roots")
        d = self.degree()
        if d == 0:
            return np.zeros(0, dtype=complex)
        if d == 1:
            return np.array([-self.coeffs[0] / self.coeffs[1]], dtype=complex)
        # LAPACK geev balances the companion matrix before the QR iteration
        return np.linalg.eigvals(self.companion_matrix())

    def real_rooted(self, tol: float = 1e-8) -> bool:
        """True iff every root z satisfies |Im z| <= tol * (1 + |z|)."""
        r = self.roots()
        return bool(np.all(np.abs(r.imag) <= tol * (1.0 + np.abs(r))))

    def real_roots(self, tol: float = 1e-8) -> np.ndarray:
        """Real parts of the roots that pass the relative realness test, sorted."""
        r = self.roots()
        keep = np.abs(r.imag) <= tol * (1.0 + np.abs(r))
        return np.sort(r.real[keep])


# -- matrix pencils ------------------------------------------------------------


class MatrixPencil:
    """Linear symmetric pencil A(x) = I_s + x_1 A_1 + ... + x_n A_n."""

    __slots__ = ("n_vars", "size", "matrices")

    def __init__(self, matrices: Iterable[np.ndarray]):
        mats = tuple(np.asarray(a, dtype=float) for a in matrices)
        if not mats:
            raise ValueError("a pencil needs at least one matrix")
        s = mats[0].shape[0]
        for a in mats:
            if a.shape != (s, s):
                raise ValueError("pencil matrices must be square and of equal size")
            if np.max(np.abs(a - a.T)) > 1e-12:
                raise ValueError("pencil matrices must be symmetric (1e-12 elementwise)")
        self.n_vars = len(mats)
        self.size = s
        self.matrices = mats

    def __repr__(self):
        return f"MatrixPencil(n_vars={self.n_vars}, size={self.size})"

    def at(self, x) -> np.ndarray:
        x = _as_point(x, self.n_vars)
        out = np.eye(self.size)
        for xi, a in zip(x, self.matrices):
            out += xi * a
        return out

    def to_json(self) -> dict:
        return {"matrices": [a.tolist() for a in self.matrices]}

    @classmethod
    def from_json(cls, obj: dict) -> "MatrixPencil":
        return cls(obj["matrices"])


def poly_det(entries: list[list[MultiPoly]]) -> MultiPoly:
    """Determinant of a square matrix of polynomials.

    Division-free Laplace expansion with minors memoized per column subset;
    the work is O(2^s * s) polynomial multiply-adds instead of s!.
    """
    s = len(entries)
    n_vars = entries[0][0].n_vars
    minors: dict[tuple, MultiPoly] = {(): MultiPoly.constant(n_vars, 1.0)}
    for r in range(s):
        nxt: dict[tuple, MultiPoly] = {}
        for cols, minor in minors.items():
            for j in range(s):
                if j in cols:
                    continue
                entry = entries[r][j]
                if entry.is_zero():
                    continue
                sign = -1.0 if sum(1 for c in cols if c > j) % 2 else 1.0
                term = minor * entry * sign
                key = tuple(sorted(cols + (j,)))
                nxt[key] = nxt[key] + term if key in nxt else term
        minors = nxt
    return minors.get(tuple(range(s)), MultiPoly(n_vars))


def det_pencil(pencil: MatrixPencil) -> MultiPoly:
    """det(I_s + sum_i x_i A_i) expanded symbolically; det at 0 is 1."""
    if pencil.size > PENCIL_MAX_SIZE or pencil.n_vars > PENCIL_MAX_VARS:
        raise BudgetExceededError(
            f"pencil of size {pencil.size} in {pencil.n_vars} variables exceeds "
            f"the s<={PENCIL_MAX_SIZE}, n<={PENCIL_MAX_VARS} expansion budget"
        )
    n, s = pencil.n_vars, pencil.size
    entries = []
    for a in range(s):
        row = []
        for b in range(s):
            terms = {}
            if a == b:
                terms[(0,) * n] = 1.0
            for i, mat in enumerate(pencil.matrices):
                if mat[a, b] != 0.0:
                    e = [0] * n
                    e[i] = 1
                    terms[tuple(e)] = terms.get(tuple(e), 0.0) + mat[a, b]
            row.append(MultiPoly(n, terms))
        entries.append(row)
    return poly_det(entries)


def blended_pencil_poly(a: MatrixPencil, b: MatrixPencil) -> MultiPoly:
    """det((1-t)*A(x) + t*B(x)) as a polynomial in (x_1..x_n, t); t is the
    last variable."""
    if a.size != b.size or a.n_vars != b.n_vars:
        raise ValueError("pencils must have equal size and variable count")
    if a.size > PENCIL_MAX_SIZE or a.n_vars > PENCIL_MAX_VARS:
        raise BudgetExceededError(
            f"pencil of size {a.size} in {a.n_vars} variables exceeds "
            f"the s<={PENCIL_MAX_SIZE}, n<={PENCIL_MAX_VARS} expansion budget"
        )
    n, s = a.n_vars, a.size
    # (1-t)A(x) + tB(x) = I + sum_i x_i A_i + sum_i (x_i t)(B_i - A_i)
    entries = []
    for p in range(s):
        row = []
        for q in range(s):
            terms = {}
            if p == q:
                terms[(0,) * (n + 1)] = 1.0
            for i in range(n):
                av = a.matrices[i][p, q]
                bv = b.matrices[i][p, q]
                if av != 0.0:
                    e = [0] * (n + 1)
                    e[i] = 1
                    terms[tuple(e)] = terms.get(tuple(e), 0.0) + av
                if bv - av != 0.0:
                    e = [0] * (n + 1)
                    e[i] = 1
                    e[n] = 1
                    terms[tuple(e)] = terms.get(tuple(e), 0.0) + (bv - av)
            row.append(MultiPoly(n + 1, terms))
        entries.append(row)
    return poly_det(entries)


# -- elementary symmetric family -----------------------------------------------


def elementary_symmetric(polys: list[MultiPoly], k: int) -> MultiPoly:
    """k-th elementary symmetric polynomial of the given polynomials, by the
    one-variable-at-a-time recursion E_j += y_i * E_{j-1}."""
    if not 0 <= k <= len(polys):
        raise ValueError("k out of range")
    n_vars = polys[0].n_vars
    table = [MultiPoly.constant(n_vars, 1.0)] + [MultiPoly(n_vars) for _ in range(k)]
    for y in polys:
        for j in range(min(k, len(polys)), 0, -1):
            table[j] = table[j] + y * table[j - 1]
    return table[k]


@lru_cache(maxsize=None)
def elementary_symmetric_pk(n: int, k: int) -> MultiPoly:
    """Dehomogenized elementary symmetric polynomial p_k in n variables:
    the degree-k elementary symmetric polynomial of the n+1 affine forms
    1 - sum(x), 1 + x_1, ..., 1 + x_n.  p_k(0) = binom(n+1, k)."""
    if not 2 <= k <= n + 1:
        raise ValueError(f"k must satisfy 2 <= k <= n+1, got k={k}, n={n}")
    y0 = MultiPoly.constant(n, 1.0) - sum(
        (MultiPoly.variable(n, i) for i in range(n)), MultiPoly(n)
    )
    ys = [y0] + [MultiPoly.constant(n, 1.0) + MultiPoly.variable(n, i) for i in range(n)]
    return elementary_symmetric(ys, k)


def unit_ball_poly(n: int) -> MultiPoly:
    """1 - ||x||^2, the canonical start polynomial."""
    terms = {(0,) * n: 1.0}
    for i in range(n):
        e = [0] * n
        e[i] = 2
        terms[tuple(e)] = -1.0
    return MultiPoly(n, terms)


def in_rigidly_convex(p: MultiPoly, x, tol: float = 1e-8) -> bool:
    """Membership in the rigidly convex set of p: the restriction to the ray
    through x has no root in [0, 1)."""
    x = _as_point(x, p.n_vars)
    if not np.any(x):
        return True
    roots = p.restrict(x).real_roots(tol)
    return not np.any((roots >= -tol) & (roots < 1.0 - tol))
