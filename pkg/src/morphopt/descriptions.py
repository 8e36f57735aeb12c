"""Time-dependent constraint descriptions.

A description evaluates the defining function p_t of a deforming feasible set
{x : p_t(x) >= 0} together with everything the path tracker consumes: spatial
gradient and Hessian, plus the time derivatives of the value and the gradient.
Static sets (unit ball, distance sums, p-norm balls, exponential sums) report
zero time derivatives; homotopies (concave combination, smoothed product of
real zero polynomials, blended matrix pencils) carry the genuine ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationSingularity, ProblemFormatError
from .poly import MatrixPencil, MultiPoly, blended_pencil_poly

FOCAL_GUARD = 1e-9


@dataclass(frozen=True)
class DescriptionEval:
    """Evaluation bundle of p_t at one (t, x)."""

    value: float
    grad: np.ndarray
    hess: np.ndarray
    dt_value: float
    dt_grad: np.ndarray


class HomotopyDescription:
    """Base class: an evaluator (t in [0,1], x in R^n) -> DescriptionEval."""

    n_vars: int
    label: str

    def evaluate(self, t: float, x: np.ndarray) -> DescriptionEval:
        raise NotImplementedError

    def value_many(self, t: float, points: np.ndarray) -> np.ndarray:
        """Values only, vectorized over rows of ``points``; default falls back
        to scalar evaluation."""
        points = np.asarray(points, dtype=float)
        return np.array([self.evaluate(t, p).value for p in points])

    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            raise ValueError(f"expected a point of length {self.n_vars}")
        return x


def _static(value, grad, hess):
    n = grad.shape[0]
    return DescriptionEval(float(value), grad, hess, 0.0, np.zeros(n))


# -- unit ball -----------------------------------------------------------------


class UnitBall(HomotopyDescription):
    """p(x) = 1 - ||x||^2, the canonical start set."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("dimension must be at least 1")
        self.n_vars = n
        self.label = f"unit_ball(n={n})"

    def evaluate(self, t, x):
        x = self._point(x)
        return _static(1.0 - x @ x, -2.0 * x, -2.0 * np.eye(self.n_vars))

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        return 1.0 - np.einsum("ij,ij->i", points, points)


def unit_ball(n: int) -> UnitBall:
    return UnitBall(n)


# -- concave combination ---------------------------------------------------------


class ConcaveCombo(HomotopyDescription):
    """p_t = (1-t) p0 + t p1 for concave p0, p1 positive at the origin."""

    def __init__(self, p0: HomotopyDescription, p1: HomotopyDescription):
        if p0.n_vars != p1.n_vars:
            raise ValueError("descriptions have different dimensions")
        self.n_vars = p0.n_vars
        self.p0 = p0
        self.p1 = p1
        origin = np.zeros(self.n_vars)
        for name, d, tt in (("p0", p0, 0.0), ("p1", p1, 1.0)):
            if d.evaluate(tt, origin).value <= 0.0:
                raise ValueError(f"{name} must be strictly positive at the origin")
        self.label = f"concave_combo({p0.label}, {p1.label})"

    def evaluate(self, t, x):
        x = self._point(x)
        a, b = self.p0.evaluate(t, x), self.p1.evaluate(t, x)
        s = 1.0 - t
        return DescriptionEval(
            value=s * a.value + t * b.value,
            grad=s * a.grad + t * b.grad,
            hess=s * a.hess + t * b.hess,
            # includes the inputs' own time derivatives so nested homotopies
            # stay exact; both terms vanish for static inputs
            dt_value=b.value - a.value + s * a.dt_value + t * b.dt_value,
            dt_grad=b.grad - a.grad + s * a.dt_grad + t * b.dt_grad,
        )

    def value_many(self, t, points):
        return (1.0 - t) * self.p0.value_many(t, points) + t * self.p1.value_many(t, points)


def concave_combo(p0: HomotopyDescription, p1: HomotopyDescription) -> ConcaveCombo:
    return ConcaveCombo(p0, p1)


# -- smoothed product homotopy of real zero polynomials ---------------------------


def _bump_schedule(eps_max: float):
    def eps(t):
        return eps_max * t * (1.0 - t)

    def deps(t):
        return eps_max * (1.0 - 2.0 * t)

    return eps, deps


class RZProductHomotopy(HomotopyDescription):
    """Homotopy within real zero polynomials:

        phat_t(x) = p0((1-t) x) * p1(t x)
        p_t       = (I + eps(t) d_R)^repeat [phat_t]

    evaluated through the scaling identity d_R[p(c.)] = (d_R p)(c.) with the
    derivative chains of p0 and p1 precomputed once.  The schedule eps
    vanishes at both endpoints, so p_0 and p_1 keep the zero sets of p0, p1.
    """

    def __init__(self, p0: MultiPoly, p1: MultiPoly, eps_max: float = 0.05,
                 repeat: int = 1, schedule=None):
        if p0.n_vars != p1.n_vars:
            raise ValueError("polynomials have different variable counts")
        self.n_vars = p0.n_vars
        origin = np.zeros(self.n_vars)
        if p0.eval(origin) <= 0.0 or p1.eval(origin) <= 0.0:
            raise ValueError("both polynomials must be strictly positive at the origin")
        if repeat < 1:
            raise ValueError("repeat must be at least 1")
        self.repeat = int(repeat)
        if schedule is None:
            self.eps, self.deps = _bump_schedule(float(eps_max))
        else:
            self.eps, self.deps = schedule
            for endpoint in (0.0, 1.0):
                if abs(self.eps(endpoint)) > 1e-15:
                    raise ValueError("smoothing schedule must vanish at t = 0 and t = 1")
        # iterated Renegar derivatives with explicit formal degrees
        self.chain0 = _renegar_chain(p0, self.repeat)
        self.chain1 = _renegar_chain(p1, self.repeat)
        self._binom_r = [math.comb(self.repeat, j) for j in range(self.repeat + 1)]
        self.label = f"rz_product(repeat={self.repeat})"

    def evaluate(self, t, x):
        x = self._point(x)
        u = (1.0 - t) * x
        v = t * x
        b0 = [q.eval_bundle(u) for q in self.chain0]
        b1 = [q.eval_bundle(v) for q in self.chain1]
        eps, deps = self.eps(t), self.deps(t)
        n = self.n_vars
        val = 0.0
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        dtv = 0.0
        dtg = np.zeros(n)
        for j in range(self.repeat + 1):
            sj = _ProductBundle.zero(n)
            for i in range(j + 1):
                sj.add(math.comb(j, i) * self._binom_r[j],
                       _product_bundle(b0[i], b1[j - i], t, x))
            ej = eps**j
            val += ej * sj.value
            grad += ej * sj.grad
            hess += ej * sj.hess
            dtv += ej * sj.dt_value
            dtg += ej * sj.dt_grad
            if j >= 1:
                dj = j * eps ** (j - 1) * deps
                dtv += dj * sj.value
                dtg += dj * sj.grad
        return DescriptionEval(val, grad, hess, dtv, dtg)

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        u = (1.0 - t) * points
        v = t * points
        vals0 = [q.eval_many(u) for q in self.chain0]
        vals1 = [q.eval_many(v) for q in self.chain1]
        eps = self.eps(t)
        out = np.zeros(points.shape[0])
        for j in range(self.repeat + 1):
            sj = np.zeros(points.shape[0])
            for i in range(j + 1):
                sj += math.comb(j, i) * vals0[i] * vals1[j - i]
            out += self._binom_r[j] * eps**j * sj
        return out


def _renegar_chain(p: MultiPoly, length: int) -> list[MultiPoly]:
    chain = [p]
    d = p.degree()
    for j in range(length):
        prev = chain[-1]
        if prev.is_zero():
            chain.append(prev)
        else:
            chain.append(prev.renegar_derivative(degree=max(d - j, prev.degree())))
    return chain


class _ProductBundle:
    __slots__ = ("value", "grad", "hess", "dt_value", "dt_grad")

    @classmethod
    def zero(cls, n):
        b = cls()
        b.value = 0.0
        b.grad = np.zeros(n)
        b.hess = np.zeros((n, n))
        b.dt_value = 0.0
        b.dt_grad = np.zeros(n)
        return b

    def add(self, w, other):
        self.value += w * other.value
        self.grad += w * other.grad
        self.hess += w * other.hess
        self.dt_value += w * other.dt_value
        self.dt_grad += w * other.dt_grad


def _product_bundle(gb, hb, t, x):
    """Five-field bundle of F(t, x) = g((1-t) x) * h(t x) from the factor
    bundles gb = (g, grad g, hess g) at u = (1-t)x and hb likewise at v = tx."""
    g, gg, gh = gb
    h, hg, hh = hb
    a = 1.0 - t
    b = t
    out = _ProductBundle()
    out.value = g * h
    out.grad = a * gg * h + b * g * hg
    out.hess = (
        a * a * gh * h
        + a * b * (np.outer(gg, hg) + np.outer(hg, gg))
        + b * b * g * hh
    )
    gg_x = gg @ x
    hg_x = hg @ x
    out.dt_value = -gg_x * h + g * hg_x
    out.dt_grad = (
        -gg * h
        - a * (gh @ x) * h
        + a * hg_x * gg
        + g * hg
        - b * gg_x * hg
        + b * g * (hh @ x)
    )
    return out


def rz_product_homotopy(p0: MultiPoly, p1: MultiPoly, eps_max: float = 0.05,
                        repeat: int = 1, schedule=None) -> RZProductHomotopy:
    return RZProductHomotopy(p0, p1, eps_max=eps_max, repeat=repeat, schedule=schedule)


# -- distance-sum set (k-ellipse) -------------------------------------------------


class KEllipse(HomotopyDescription):
    """p(x) = r - sum_i ||x - u_i||; not differentiable at the focal points,
    evaluation inside the guard radius raises EvaluationSingularity."""

    def __init__(self, focal_points, r: float):
        U = np.atleast_2d(np.asarray(focal_points, dtype=float))
        self.foci = U
        self.r = float(r)
        self.n_vars = U.shape[1]
        if self.r - np.linalg.norm(U, axis=1).sum() <= 0.0:
            raise ValueError("origin must be strictly inside the distance-sum set")
        self.label = f"k_ellipse(k={U.shape[0]}, r={self.r})"

    def evaluate(self, t, x):
        x = self._point(x)
        diffs = x - self.foci
        dists = np.linalg.norm(diffs, axis=1)
        if np.min(dists) <= FOCAL_GUARD:
            raise EvaluationSingularity(
                f"evaluation within {FOCAL_GUARD} of a focal point"
            )
        w = diffs / dists[:, None]
        grad = -w.sum(axis=0)
        hess = -(
            np.eye(self.n_vars) * (1.0 / dists).sum()
            - np.einsum("k,ki,kj->ij", 1.0 / dists, w, w)
        )
        return _static(self.r - dists.sum(), grad, hess)

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        total = np.zeros(points.shape[0])
        for u in self.foci:
            total += np.linalg.norm(points - u, axis=1)
        return self.r - total


def k_ellipse(focal_points, r: float) -> KEllipse:
    return KEllipse(focal_points, r)


# -- p-norm ball -------------------------------------------------------------------


class PNormBall(HomotopyDescription):
    """p(x) = r^p - sum x_i^p for an even integer p (twice differentiable)."""

    def __init__(self, p: int, r: float, n: int):
        if int(p) != p or p < 2 or p % 2:
            raise ValueError("the norm exponent must be an even integer >= 2")
        if r <= 0:
            raise ValueError("radius must be positive")
        self.p = int(p)
        self.r = float(r)
        self.n_vars = int(n)
        self.label = f"pnorm_ball(p={self.p}, r={self.r}, n={n})"

    def evaluate(self, t, x):
        x = self._point(x)
        p = self.p
        value = self.r**p - np.sum(x**p)
        grad = -p * x ** (p - 1)
        hess = np.diag(-p * (p - 1) * x ** (p - 2))
        return _static(value, grad, hess)

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        return self.r**self.p - np.sum(points**self.p, axis=1)


def pnorm_ball(p: int, r: float, n: int) -> PNormBall:
    return PNormBall(p, r, n)


# -- exponential-sum constraint (single-constraint geometric program) ---------------


class ExponentialSum(HomotopyDescription):
    """p(x) = C - sum_k c_k exp(b_k . x + a_k) with c_k > 0; concave."""

    def __init__(self, coeffs, exponents, offsets, level):
        self.c = np.asarray(coeffs, dtype=float)
        self.B = np.atleast_2d(np.asarray(exponents, dtype=float))
        self.a = np.asarray(offsets, dtype=float)
        self.level = float(level)
        if np.any(self.c <= 0):
            raise ValueError("coefficients must be positive")
        if not (self.c.shape[0] == self.B.shape[0] == self.a.shape[0]):
            raise ValueError("coefficients, exponents and offsets must have equal length")
        self.n_vars = self.B.shape[1]
        if self.level - float(self.c @ np.exp(self.a)) <= 0.0:
            raise ValueError("origin must be strictly inside the constraint set")
        self.label = f"exponential_sum(r={self.c.shape[0]}, C={self.level})"

    def evaluate(self, t, x):
        x = self._point(x)
        w = self.c * np.exp(self.B @ x + self.a)
        grad = -self.B.T @ w
        hess = -np.einsum("k,ki,kj->ij", w, self.B, self.B)
        return _static(self.level - w.sum(), grad, hess)

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        return self.level - np.exp(points @ self.B.T + self.a) @ self.c


def geometric_constraint(coeffs, exponents, offsets, level) -> ExponentialSum:
    return ExponentialSum(coeffs, exponents, offsets, level)


# -- log-sum-exp constraint ----------------------------------------------------------


class LogSumExp(HomotopyDescription):
    """p(x) = L - log(sum_k c_k exp(b_k . x + a_k)); concave (softmax Hessian)."""

    def __init__(self, exponents, level, coeffs=None, offsets=None):
        self.B = np.atleast_2d(np.asarray(exponents, dtype=float))
        m = self.B.shape[0]
        self.c = np.ones(m) if coeffs is None else np.asarray(coeffs, dtype=float)
        self.a = np.zeros(m) if offsets is None else np.asarray(offsets, dtype=float)
        if np.any(self.c <= 0):
            raise ValueError("coefficients must be positive")
        self.level = float(level)
        self.n_vars = self.B.shape[1]
        if self._value(np.zeros(self.n_vars)) <= 0.0:
            raise ValueError("origin must be strictly inside the constraint set")
        self.label = f"log_sum_exp(r={m}, L={self.level})"

    def _logits(self, x):
        return self.B @ x + self.a + np.log(self.c)

    def _value(self, x):
        z = self._logits(x)
        m = z.max()
        return self.level - m - math.log(np.exp(z - m).sum())

    def evaluate(self, t, x):
        x = self._point(x)
        z = self._logits(x)
        m = z.max()
        w = np.exp(z - m)
        s = w.sum()
        sig = w / s
        mean = self.B.T @ sig
        grad = -mean
        hess = -(np.einsum("k,ki,kj->ij", sig, self.B, self.B) - np.outer(mean, mean))
        return _static(self.level - m - math.log(s), grad, hess)

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        z = points @ self.B.T + self.a + np.log(self.c)
        m = z.max(axis=1)
        return self.level - m - np.log(np.exp(z - m[:, None]).sum(axis=1))


def log_sum_exp(exponents, level, coeffs=None, offsets=None) -> LogSumExp:
    return LogSumExp(exponents, level, coeffs=coeffs, offsets=offsets)


# -- blended matrix pencils ------------------------------------------------------------


class PencilHomotopy(HomotopyDescription):
    """p_t(x) = det((1-t) A(x) + t B(x)), with all derivatives taken from the
    symbolically expanded determinant in (x, t)."""

    def __init__(self, a: MatrixPencil, b: MatrixPencil):
        self.poly = blended_pencil_poly(a, b)  # variables (x_1..x_n, t)
        self.n_vars = a.n_vars
        self.pencils = (a, b)
        self.label = f"pencil_homotopy(n={a.n_vars}, s={a.size})"

    def evaluate(self, t, x):
        x = self._point(x)
        z = np.concatenate([x, [t]])
        value, gz, hz = self.poly.eval_bundle(z)
        n = self.n_vars
        return DescriptionEval(
            value=value,
            grad=gz[:n],
            hess=hz[:n, :n],
            dt_value=float(gz[n]),
            dt_grad=hz[:n, n].copy(),
        )

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        z = np.hstack([points, np.full((points.shape[0], 1), t)])
        return self.poly.eval_many(z)


def pencil_homotopy(a: MatrixPencil, b: MatrixPencil) -> PencilHomotopy:
    return PencilHomotopy(a, b)


# -- JSON schema -----------------------------------------------------------------------


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ProblemFormatError(f"{where}.{key}: missing required field")
    return obj[key]


def description_from_json(obj: dict, where: str = "description") -> HomotopyDescription:
    """Build a description from its JSON object; error messages name fields."""
    if not isinstance(obj, dict):
        raise ProblemFormatError(f"{where}: expected an object")
    kind = _require(obj, "kind", where)
    try:
        if kind == "unit_ball":
            return unit_ball(int(_require(obj, "n", where)))
        if kind == "concave_combo":
            return concave_combo(
                description_from_json(_require(obj, "p0", where), f"{where}.p0"),
                description_from_json(_require(obj, "p1", where), f"{where}.p1"),
            )
        if kind == "rz_product":
            return rz_product_homotopy(
                MultiPoly.from_json(_require(obj, "p0", where)),
                MultiPoly.from_json(_require(obj, "p1", where)),
                eps_max=float(obj.get("eps_max", 0.05)),
                repeat=int(obj.get("repeat", 1)),
            )
        if kind == "k_ellipse":
            return k_ellipse(
                _require(obj, "focal_points", where), float(_require(obj, "r", where))
            )
        if kind == "pnorm_ball":
            return pnorm_ball(
                int(_require(obj, "p", where)),
                float(_require(obj, "r", where)),
                int(_require(obj, "n", where)),
            )
        if kind == "geometric":
            return geometric_constraint(
                _require(obj, "coeffs", where),
                _require(obj, "exponents", where),
                _require(obj, "offsets", where),
                float(_require(obj, "level", where)),
            )
        if kind == "log_sum_exp":
            return log_sum_exp(
                _require(obj, "exponents", where),
                float(_require(obj, "level", where)),
                coeffs=obj.get("coeffs"),
                offsets=obj.get("offsets"),
            )
        if kind == "pencil_homotopy":
            return pencil_homotopy(
                MatrixPencil(_require(obj, "a", where)["matrices"]
                             if isinstance(obj.get("a"), dict) else _require(obj, "a", where)),
                MatrixPencil(_require(obj, "b", where)["matrices"]
                             if isinstance(obj.get("b"), dict) else _require(obj, "b", where)),
            )
    except ProblemFormatError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ProblemFormatError(f"{where}: {exc}") from exc
    raise ProblemFormatError(f"{where}.kind: unknown kind {kind!r}")
