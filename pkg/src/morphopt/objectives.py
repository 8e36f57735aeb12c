"""Objective evaluation bundles.

Static linear objectives, the concave negative-distance objective, and the
convex-combination homotopy between two objectives.  The bundle mirrors the
description side: value, gradient, Hessian, and time derivatives of value and
gradient (identically zero for anything static).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationSingularity, ProblemFormatError

CENTER_GUARD = 1e-9


@dataclass(frozen=True)
class ObjectiveEval:
    value: float
    grad: np.ndarray
    hess: np.ndarray
    dt_value: float
    dt_grad: np.ndarray


class Objective:
    n_vars: int
    label: str

    def evaluate(self, t: float, x: np.ndarray) -> ObjectiveEval:
        raise NotImplementedError

    def value_many(self, t: float, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.array([self.evaluate(t, p).value for p in points])

    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            raise ValueError(f"expected a point of length {self.n_vars}")
        return x


def _static(value, grad, hess):
    n = grad.shape[0]
    return ObjectiveEval(float(value), grad, hess, 0.0, np.zeros(n))


class LinearObjective(Objective):
    """f(x) = w . x."""

    def __init__(self, w):
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or not np.any(w):
            raise ValueError("the linear functional must be a nonzero vector")
        self.w = w
        self.n_vars = w.shape[0]
        self.label = "linear"

    def evaluate(self, t, x):
        x = self._point(x)
        return _static(self.w @ x, self.w.copy(), np.zeros((self.n_vars, self.n_vars)))

    def value_many(self, t, points):
        return np.asarray(points, dtype=float) @ self.w


def linear(w) -> LinearObjective:
    return LinearObjective(w)


class NegativeDistance(Objective):
    """f(x) = -||x - y||; concave, singular at the center y."""

    def __init__(self, y):
        self.y = np.asarray(y, dtype=float)
        self.n_vars = self.y.shape[0]
        self.label = "negative_distance"

    def evaluate(self, t, x):
        x = self._point(x)
        diff = x - self.y
        d = float(np.linalg.norm(diff))
        if d <= CENTER_GUARD:
            raise EvaluationSingularity(f"evaluation within {CENTER_GUARD} of the center")
        w = diff / d
        return _static(-d, -w, -(np.eye(self.n_vars) - np.outer(w, w)) / d)

    def value_many(self, t, points):
        points = np.asarray(points, dtype=float)
        return -np.linalg.norm(points - self.y, axis=1)


def negative_distance(y) -> NegativeDistance:
    return NegativeDistance(y)


class ObjectiveHomotopy(Objective):
    """f_t = (1-t) f0 + t f1 for concave f0, f1."""

    def __init__(self, f0: Objective, f1: Objective):
        if f0.n_vars != f1.n_vars:
            raise ValueError("objectives have different dimensions")
        self.f0 = f0
        self.f1 = f1
        self.n_vars = f0.n_vars
        self.label = f"homotopy({f0.label}, {f1.label})"

    def evaluate(self, t, x):
        x = self._point(x)
        a, b = self.f0.evaluate(t, x), self.f1.evaluate(t, x)
        s = 1.0 - t
        return ObjectiveEval(
            value=s * a.value + t * b.value,
            grad=s * a.grad + t * b.grad,
            hess=s * a.hess + t * b.hess,
            dt_value=b.value - a.value + s * a.dt_value + t * b.dt_value,
            dt_grad=b.grad - a.grad + s * a.dt_grad + t * b.dt_grad,
        )

    def value_many(self, t, points):
        return (1.0 - t) * self.f0.value_many(t, points) + t * self.f1.value_many(t, points)


def objective_homotopy(f0: Objective, f1: Objective) -> ObjectiveHomotopy:
    return ObjectiveHomotopy(f0, f1)


def objective_from_json(obj: dict, where: str = "objective") -> Objective:
    if not isinstance(obj, dict):
        raise ProblemFormatError(f"{where}: expected an object")
    if "kind" not in obj:
        raise ProblemFormatError(f"{where}.kind: missing required field")
    kind = obj["kind"]
    try:
        if kind == "linear":
            if "w" not in obj:
                raise ProblemFormatError(f"{where}.w: missing required field")
            return linear(obj["w"])
        if kind == "negative_distance":
            if "y" not in obj:
                raise ProblemFormatError(f"{where}.y: missing required field")
            return negative_distance(obj["y"])
        if kind == "homotopy":
            for key in ("f0", "f1"):
                if key not in obj:
                    raise ProblemFormatError(f"{where}.{key}: missing required field")
            return objective_homotopy(
                objective_from_json(obj["f0"], f"{where}.f0"),
                objective_from_json(obj["f1"], f"{where}.f1"),
            )
    except ProblemFormatError:
        raise
    except (ValueError, TypeError) as exc:
        raise ProblemFormatError(f"{where}: {exc}") from exc
    raise ProblemFormatError(f"{where}.kind: unknown kind {kind!r}")
