"""Named problem constructors wiring descriptions, objectives and start data.

Every benchmark family starts from the unit ball (where the linear-objective
optimum is w/||w||) and deforms into its target set: the symmetric-cone slice
through the smoothed product homotopy of real zero polynomials, everything
else through the concave combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .descriptions import (
    HomotopyDescription,
    concave_combo,
    geometric_constraint,
    k_ellipse,
    pnorm_ball,
    rz_product_homotopy,
    unit_ball,
)
from .objectives import Objective, linear, negative_distance, objective_homotopy
from .poly import elementary_symmetric_pk, unit_ball_poly
from .tracker import SolveReport, TrackerOptions, initial_point_unit_ball, track


@dataclass
class Problem:
    description: HomotopyDescription
    objective: Objective
    x0: np.ndarray
    label: str
    meta: dict = field(default_factory=dict)

    def solve(self, opts: TrackerOptions | None = None) -> SolveReport:
        return track(self.description, self.objective, self.x0, opts)


def hyperbolic_symmetric(n: int, k: int, w, eps_max: float = 0.05,
                         repeat: int = 1) -> Problem:
    """Maximize w . x over the rigidly convex set of the dehomogenized
    elementary symmetric polynomial p_k (bounded for k >= 2)."""
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= n, got k={k}, n={n}")
    description = rz_product_homotopy(
        unit_ball_poly(n), elementary_symmetric_pk(n, k), eps_max=eps_max, repeat=repeat
    )
    return Problem(
        description=description,
        objective=linear(w),
        x0=initial_point_unit_ball(w),
        label=f"symmetric(n={n}, k={k})",
        meta={"n": n, "k": k, "sdp_lift_size": sdp_lift_size(k, n)},
    )


def ellipse_problem(focal_points, r: float, w) -> Problem:
    """Maximize w . x over the set of points whose summed distance to the
    focal points is at most r."""
    target = k_ellipse(focal_points, r)
    return Problem(
        description=concave_combo(unit_ball(target.n_vars), target),
        objective=linear(w),
        x0=initial_point_unit_ball(w),
        label=f"ellipse(k={len(target.foci)}, n={target.n_vars})",
        meta={"k": len(target.foci), "r": r},
    )


def pnorm_problem(p: int, r: float, n: int, w) -> Problem:
    """Maximize w . x over the p-norm ball of radius r."""
    return Problem(
        description=concave_combo(unit_ball(n), pnorm_ball(p, r, n)),
        objective=linear(w),
        x0=initial_point_unit_ball(w),
        label=f"pnorm(p={p}, n={n})",
        meta={"p": p, "r": r},
    )


def geometric_problem(coeffs, exponents, offsets, level, w) -> Problem:
    """Maximize w . x subject to a single positive exponential-sum constraint
    (a one-constraint geometric program after the log substitution)."""
    target = geometric_constraint(coeffs, exponents, offsets, level)
    return Problem(
        description=concave_combo(unit_ball(target.n_vars), target),
        objective=linear(w),
        x0=initial_point_unit_ball(w),
        label=f"geometric(r={len(np.atleast_1d(coeffs))}, n={target.n_vars})",
        meta={"level": float(level)},
    )


def distance_problem(target: HomotopyDescription, y, w0) -> Problem:
    """Closest point of the target set to y, via the objective homotopy from
    the linear functional w0 to -||x - y||."""
    y = np.asarray(y, dtype=float)
    if target.evaluate(1.0, y).value >= 0.0:
        raise ValueError("the distance target point must lie outside the feasible set")
    return Problem(
        description=concave_combo(unit_ball(target.n_vars), target),
        objective=objective_homotopy(linear(w0), negative_distance(y)),
        x0=initial_point_unit_ball(w0),
        label=f"distance(to={target.label})",
        meta={"y": list(y)},
    )


def sdp_lift_size(k: int, n: int) -> int:
    """Matrix size of the known spectrahedral lift of the symmetric-cone
    slice: sum_{i=0}^{k-1} binom(n+1, i) * i!, the number of strings of
    length below k with distinct characters from an alphabet of n+1 symbols.
    Metadata only; no semidefinite program is ever built."""
    if not 1 <= k <= n + 1:
        raise ValueError(f"k must satisfy 1 <= k <= n+1, got k={k}, n={n}")
    return sum(math.comb(n + 1, i) * math.factorial(i) for i in range(k))
