"""Stationarity system for boundary-constrained maximization.

A point x is stationary for max f_t subject to p_t(x) = 0 exactly when
p_t(x) = 0 and the gradients of f_t and p_t are parallel.  With a pivot index
k chosen so that the k-th component of grad f_t is nonzero, parallelism is
equivalent to the vanishing of

    Q_{k,i}(x, t) = d_k f_t(x) * d_i p_t(x) - d_i f_t(x) * d_k p_t(x)

for every i != k.  Stacking p_t with the Q_{k,i} gives the corrector residual;
its Jacobian in x is the matrix K whose first row is grad p_t and whose
remaining rows are the gradients of the Q_{k,i}.  Differentiating the residual
along a path of stationary points yields the linear system

    K(x, t) dx/dt = -m(x, t),

with m stacking the partial time derivatives of p_t and of the Q_{k,i}; its
solution is the ODE right-hand side the tracker integrates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptions import DescriptionEval, HomotopyDescription
from .errors import SingularSystemError
from .objectives import Objective, ObjectiveEval

SINGULAR_COND = 1e12


@dataclass
class StationaritySystem:
    description: HomotopyDescription
    objective: Objective
    pivot: int

    def __post_init__(self):
        n = self.description.n_vars
        if self.objective.n_vars != n:
            raise ValueError("description and objective dimensions differ")
        if not 0 <= self.pivot < n:
            raise ValueError(f"pivot {self.pivot} out of range for dimension {n}")

    @property
    def n(self) -> int:
        return self.description.n_vars


def select_pivot(objective: Objective, x, t: float) -> int:
    """Index of the largest objective gradient component at (t, x)."""
    g = objective.evaluate(t, np.asarray(x, dtype=float)).grad
    return int(np.argmax(np.abs(g)))


def _evals(sys: StationaritySystem, x, t) -> tuple[DescriptionEval, ObjectiveEval]:
    x = np.asarray(x, dtype=float)
    return sys.description.evaluate(t, x), sys.objective.evaluate(t, x)


def q_value(sys: StationaritySystem, i: int, x, t: float) -> float:
    """Q_{k,i} at (x, t); the pivot k is part of the system."""
    if i == sys.pivot:
        raise ValueError("q_value needs i different from the pivot index")
    de, fe = _evals(sys, x, t)
    k = sys.pivot
    return float(fe.grad[k] * de.grad[i] - fe.grad[i] * de.grad[k])


def corrector_residual(sys: StationaritySystem, x, t: float) -> np.ndarray:
    """Residual (p_t(x), Q_{k,i}(x,t) for i != k); zero exactly on the
    stationarity manifold.  Its Jacobian in x is the matrix K."""
    de, fe = _evals(sys, x, t)
    return _residual_from(de, fe, sys.pivot)


def _residual_from(de, fe, k) -> np.ndarray:
    q = fe.grad[k] * de.grad - de.grad[k] * fe.grad
    return np.concatenate([[de.value], np.delete(q, k)])


def assemble(sys: StationaritySystem, x, t: float) -> tuple[np.ndarray, np.ndarray]:
    """The matrix K and vector m at (x, t)."""
    de, fe = _evals(sys, x, t)
    return _assemble_from(de, fe, sys.pivot)


def _assemble_from(de, fe, k) -> tuple[np.ndarray, np.ndarray]:
    n = de.grad.shape[0]
    gp, gf = de.grad, fe.grad
    Hp, Hf = de.hess, fe.hess
    # grad Q_{k,i} = d_i p * Hf[k] + d_k f * Hp[i] - d_k p * Hf[i] - d_i f * Hp[k]
    # (for a linear objective Hf = 0 and only the middle terms survive)
    rows = (
        gp[:, None] * Hf[k][None, :]
        + gf[k] * Hp
        - gp[k] * Hf
        - gf[:, None] * Hp[k][None, :]
    )
    K = np.empty((n, n))
    K[0] = gp
    K[1:] = np.delete(rows, k, axis=0)

    dgp, dgf = de.dt_grad, fe.dt_grad
    dq = dgf[k] * gp + gf[k] * dgp - dgf * gp[k] - gf * dgp[k]
    m = np.empty(n)
    m[0] = de.dt_value
    m[1:] = np.delete(dq, k)
    return K, m


def residual_and_jacobian(sys: StationaritySystem, x, t: float):
    """(residual, K) sharing one evaluation; used by the Newton corrector."""
    de, fe = _evals(sys, x, t)
    K, _ = _assemble_from(de, fe, sys.pivot)
    return _residual_from(de, fe, sys.pivot), K


def ode_rhs(sys: StationaritySystem, x, t: float) -> np.ndarray:
    """Solve K y = -m by partial-pivoted elimination; the path derivative."""
    K, m = assemble(sys, x, t)
    return solve_checked(K, -m, x, t)


def solve_checked(K: np.ndarray, rhs: np.ndarray, x, t) -> np.ndarray:
    """Dense solve with a condition estimate; raises SingularSystemError when
    the system is numerically rank deficient (condition above 1e12)."""
    if not np.all(np.isfinite(K)) or not np.all(np.isfinite(rhs)):
        raise SingularSystemError("non-finite stationarity system", x=x, t=t)
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularSystemError(
            f"stationarity matrix is numerically singular (cond ~ {cond:.3e}) "
            f"at t = {t:.6g}",
            x=np.asarray(x, dtype=float),
            t=t,
            cond=float(cond),
        )
    try:
        y = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc), x=x, t=t) from exc
    return y
