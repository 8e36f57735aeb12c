"""Path tracker: integrates the stationarity ODE from t = 0 to t = 1.

Predictor: embedded Dormand-Prince 5(4) pair with PI step-size control.
Corrector: Newton iteration on the stationarity residual (whose Jacobian is
the matrix K the predictor already assembles), run after every accepted step
so floating-point drift off the manifold cannot accumulate.  The endpoint is
reached by integrating to 1 - 1e-9 and polishing at frozen t = 1, where the
smoothing schedule vanishes and strict quasi-concavity may degenerate.

Divergence handling: an iterate outside ``divergence_radius`` reports
PathDiverged, as does persistent step failure at an iterate far outside the
start scale (evaluation noise of polynomial descriptions grows like ||x||^2,
so near an escape to infinity the corrector hits its noise floor before the
iterate literally crosses the radius).
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .descriptions import HomotopyDescription
from .errors import EvaluationSingularity, SingularSystemError
from .lagrange import (
    StationaritySystem,
    corrector_residual,
    ode_rhs,
    residual_and_jacobian,
    select_pivot,
    solve_checked,
)
from .objectives import Objective
from .oracle import kkt_residual

CONVERGED = "Converged"
PATH_DIVERGED = "PathDiverged"
SINGULAR_K = "SingularK"
STEP_UNDERFLOW = "StepUnderflow"
SINGULAR_EVALUATION = "SingularEvaluation"

T_END_GAP = 1e-9
GRADIENT_FLOOR = 1e-8
SINGULAR_RETRIES = 6
MAX_ATTEMPTS_PER_STEP = 60
# fraction of divergence_radius beyond which persistent step failure is
# classified as divergence rather than a solver breakdown
DIVERGED_FAILURE_FRACTION = 1e-4

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_ERR = _B5 - _B4


@dataclass
class TrackerOptions:
    rk_tolerance: float = 1e-7
    corrector_tolerance: float = 1e-10
    max_corrector_iters: int = 8
    min_step: float = 1e-10
    max_step: float = 0.05
    divergence_radius: float = 1e6
    end_tolerance: float = 1e-8

    def __post_init__(self):
        for name in ("rk_tolerance", "corrector_tolerance", "min_step",
                     "max_step", "divergence_radius", "end_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_corrector_iters < 1:
            raise ValueError("max_corrector_iters must be at least 1")
        if self.min_step >= self.max_step:
            raise ValueError("min_step must be below max_step")


@dataclass
class TrackerState:
    t: float
    x: np.ndarray
    step: float
    pivot: int
    last_residual: float


@dataclass
class SolveReport:
    status: str
    path: list = field(default_factory=list)  # (t, x) samples at accepted steps
    final_point: np.ndarray | None = None
    final_value: float | None = None
    final_kkt_residual: float | None = None
    step_count: int = 0
    corrector_stats: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    divergence_time: float | None = None
    limit_point: bool = False

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "final_point": None if self.final_point is None else list(self.final_point),
            "final_value": self.final_value,
            "final_kkt_residual": self.final_kkt_residual,
            "step_count": self.step_count,
            "corrector_stats": self.corrector_stats,
            "diagnostics": list(self.diagnostics),
            "divergence_time": self.divergence_time,
            "limit_point": self.limit_point,
            "path": [[t, list(x)] for t, x in self.path],
        }

    def path_rows(self) -> list:
        """CSV-ready rows t, x_1, ..., x_n."""
        return [[t, *x] for t, x in self.path]


RefineResult = namedtuple("RefineResult", ["point", "kkt_residual", "limit_point"])


def initial_point_unit_ball(w) -> np.ndarray:
    """Maximizer of w . x over the unit ball: w / ||w||."""
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        raise ValueError("the functional must be nonzero")
    return w / norm


class _NewtonOutcome(
    namedtuple("_NewtonOutcome", ["x", "residual", "iterations", "ok", "jacobian"])
):
    __slots__ = ()


def _newton(sys: StationaritySystem, x0: np.ndarray, t: float,
            opts: TrackerOptions) -> _NewtonOutcome:
    """Newton projection onto the stationarity manifold at frozen t."""
    x = np.asarray(x0, dtype=float).copy()
    tol = opts.corrector_tolerance
    iters = 0
    K = None
    for _ in range(opts.max_corrector_iters):
        r, K = residual_and_jacobian(sys, x, t)
        rn = float(np.max(np.abs(r)))
        if rn <= tol:
            return _NewtonOutcome(x, rn, iters, True, K)
        d = solve_checked(K, r, x, t)
        if not np.all(np.isfinite(d)):
            return _NewtonOutcome(x, rn, iters, False, K)
        x = x - d
        iters += 1
        # a machine-precision step means the iterate is as converged as the
        # evaluation noise allows
        if np.max(np.abs(d)) <= 100 * np.finfo(float).eps * (1.0 + np.max(np.abs(x))):
            r = corrector_residual(sys, x, t)
            return _NewtonOutcome(x, float(np.max(np.abs(r))), iters, True, K)
    rn = float(np.max(np.abs(corrector_residual(sys, x, t))))
    return _NewtonOutcome(x, rn, iters, rn <= tol, K)


def _rk_step(sys: StationaritySystem, x: np.ndarray, t: float, h: float,
             opts: TrackerOptions) -> tuple[np.ndarray, float]:
    """One Dormand-Prince 5(4) proposal; returns (y, scaled error norm)."""
    n = x.shape[0]
    k = np.empty((7, n))
    k[0] = ode_rhs(sys, x, t)
    for i in range(1, 6):
        xi = x + h * (_A[i] @ k[:i])
        k[i] = ode_rhs(sys, xi, t + _C[i] * h)
    y = x + h * (_B5[:6] @ k[:6])
    if not np.all(np.isfinite(y)):
        return y, math.inf
    k[6] = ode_rhs(sys, y, t + h)
    err_vec = h * (_ERR @ k)
    scale = opts.rk_tolerance * (1.0 + np.maximum(np.abs(x), np.abs(y)))
    err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
    return y, err


def _pi_factor(err: float, err_prev: float) -> float:
    if err <= 0.0:
        return 5.0
    fac = 0.9 * err ** (-0.14) * err_prev ** 0.08
    return float(np.clip(fac, 0.2, 5.0))


def track(description: HomotopyDescription, objective: Objective, x0,
          opts: TrackerOptions | None = None) -> SolveReport:
    """Track the path of optimal points from t = 0 to t = 1.

    ``x0`` must be (close to) the optimum of the t = 0 problem; it gets an
    initial Newton polish and tracking fails fast when that polish cannot
    reach the corrector tolerance.
    """
    opts = opts or TrackerOptions()
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (description.n_vars,):
        raise ValueError("start point dimension mismatch")

    stats = {
        "newton_iterations": 0,
        "rejected_steps": 0,
        "singular_retries": 0,
        "pivot_switches": 0,
        "max_manifold_residual": 0.0,
        "max_condition_number": 0.0,
    }
    report = SolveReport(status=CONVERGED, corrector_stats=stats)

    pivot = select_pivot(objective, x, 0.0)
    sys = StationaritySystem(description, objective, pivot)
    try:
        polished = _newton(sys, x, 0.0, opts)
    except (EvaluationSingularity, SingularSystemError) as exc:
        raise ValueError(f"start point failed to polish at t=0: {exc}") from exc
    if not polished.ok:
        raise ValueError(
            "start point failed to polish onto the stationarity manifold at t=0 "
            f"(residual {polished.residual:.3e})"
        )
    stats["newton_iterations"] += polished.iterations
    stats["max_manifold_residual"] = polished.residual
    state = TrackerState(t=0.0, x=polished.x, step=min(opts.max_step, 0.01),
                         pivot=pivot, last_residual=polished.residual)
    report.path.append((0.0, state.x.copy()))

    t_end = 1.0 - T_END_GAP
    err_prev = 1.0
    status = None
    diverged_floor = DIVERGED_FAILURE_FRACTION * opts.divergence_radius

    def fail_large_x(fallback: str, message: str) -> str:
        if np.linalg.norm(state.x) > diverged_floor:
            report.divergence_time = state.t
            report.diagnostics.append(
                f"persistent step failure at ||x|| = {np.linalg.norm(state.x):.3e}; "
                "classified as path divergence"
            )
            return PATH_DIVERGED
        report.diagnostics.append(message)
        return fallback

    while state.t < t_end and status is None:
        h = min(state.step, t_end - state.t)
        singular_seen = 0
        attempts = 0
        accepted = False
        while not accepted and status is None:
            attempts += 1
            if h < opts.min_step or attempts > MAX_ATTEMPTS_PER_STEP:
                status = fail_large_x(
                    STEP_UNDERFLOW, f"step controller demanded h < {opts.min_step}"
                )
                break
            try:
                y_prop, err = _rk_step(sys, state.x, state.t, h, opts)
            except EvaluationSingularity as exc:
                singular_seen += 1
                stats["singular_retries"] += 1
                if singular_seen > SINGULAR_RETRIES:
                    status = fail_large_x(SINGULAR_EVALUATION, str(exc))
                    break
                h *= 0.5
                continue
            except SingularSystemError as exc:
                singular_seen += 1
                stats["singular_retries"] += 1
                if singular_seen > SINGULAR_RETRIES:
                    status = fail_large_x(SINGULAR_K, str(exc))
                    break
                h *= 0.5
                continue
            if not math.isfinite(err) or err > 1.0:
                stats["rejected_steps"] += 1
                shrink = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
                h *= min(shrink, 0.9)
                continue
            if np.linalg.norm(y_prop) > opts.divergence_radius:
                status = PATH_DIVERGED
                report.divergence_time = state.t + h
                break
            try:
                outcome = _newton(sys, y_prop, state.t + h, opts)
            except (EvaluationSingularity, SingularSystemError) as exc:
                singular_seen += 1
                stats["singular_retries"] += 1
                if singular_seen > SINGULAR_RETRIES:
                    status = fail_large_x(
                        SINGULAR_EVALUATION if isinstance(exc, EvaluationSingularity)
                        else SINGULAR_K,
                        str(exc),
                    )
                    break
                h *= 0.5
                continue
            stats["newton_iterations"] += outcome.iterations
            if not outcome.ok:
                stats["rejected_steps"] += 1
                h *= 0.5
                continue
            accepted = True

        if status is not None or not accepted:
            break

        state.t += h
        state.x = outcome.x
        state.last_residual = outcome.residual
        stats["max_manifold_residual"] = max(
            stats["max_manifold_residual"], outcome.residual
        )
        report.step_count += 1
        report.path.append((state.t, state.x.copy()))

        if np.linalg.norm(state.x) > opts.divergence_radius:
            status = PATH_DIVERGED
            report.divergence_time = state.t
            break

        fe = objective.evaluate(state.t, state.x)
        if np.linalg.norm(fe.grad) < GRADIENT_FLOOR:
            status = SINGULAR_K
            report.diagnostics.append(
                f"objective gradient vanished on the path at t = {state.t:.6g}"
            )
            break
        new_pivot = int(np.argmax(np.abs(fe.grad)))
        if new_pivot != state.pivot:
            stats["pivot_switches"] += 1
            new_sys = StationaritySystem(description, objective, new_pivot)
            try:
                re_out = _newton(new_sys, state.x, state.t, opts)
            except (EvaluationSingularity, SingularSystemError):
                re_out = None
            if re_out is not None and re_out.ok:
                state.pivot = new_pivot
                state.x = re_out.x
                sys = new_sys
                stats["newton_iterations"] += re_out.iterations
                stats["max_manifold_residual"] = max(
                    stats["max_manifold_residual"], re_out.residual
                )
            else:
                report.diagnostics.append(
                    f"pivot switch to {new_pivot} rejected at t = {state.t:.6g}"
                )
        if outcome.jacobian is not None:
            stats["max_condition_number"] = max(
                stats["max_condition_number"], float(np.linalg.cond(outcome.jacobian))
            )

        state.step = min(opts.max_step, h * _pi_factor(err, err_prev))
        err_prev = max(err, 1e-16)

    if status is None:
        # end of homotopy reached: polish at frozen t = 1
        refined = endpoint_refine(description, objective, state.x, opts)
        report.status = CONVERGED
        report.final_point = refined.point
        report.limit_point = refined.limit_point
        if refined.limit_point:
            report.diagnostics.append(
                "endpoint Newton stalled; returning the limit-point iterate"
            )
        report.final_kkt_residual = refined.kkt_residual
        report.final_value = float(
            objective.evaluate(1.0, refined.point).value
        )
        report.path.append((1.0, refined.point.copy()))
    else:
        report.status = status
        report.final_point = state.x.copy()
        report.final_value = None
        report.final_kkt_residual = None
    return report


def endpoint_refine(description: HomotopyDescription, objective: Objective, x,
                    opts: TrackerOptions | None = None) -> RefineResult:
    """Full Newton polish of the stationarity residual at frozen t = 1.

    Iterates to end_tolerance and keeps going toward the corrector tolerance
    while progress lasts.  If Newton stalls (singular K at the endpoint where
    the smoothing vanishes), the best iterate is returned with the
    limit_point flag instead of failing.
    """
    opts = opts or TrackerOptions()
    x = np.asarray(x, dtype=float).copy()
    pivot = select_pivot(objective, x, 1.0)
    sys = StationaritySystem(description, objective, pivot)
    target = min(opts.end_tolerance, opts.corrector_tolerance)
    best_x = x.copy()
    best_rn = math.inf
    stalled = False
    no_progress = 0
    for _ in range(5 * opts.max_corrector_iters):
        try:
            r, K = residual_and_jacobian(sys, x, 1.0)
        except (EvaluationSingularity, SingularSystemError):
            stalled = True
            break
        rn = float(np.max(np.abs(r)))
        if rn < best_rn:
            best_x = x.copy()
            best_rn = rn
            no_progress = 0
        else:
            no_progress += 1
            if no_progress >= 3:
                stalled = True
                break
        if rn <= target:
            break
        try:
            d = solve_checked(K, r, x, 1.0)
        except SingularSystemError:
            stalled = True
            break
        if not np.all(np.isfinite(d)):
            stalled = True
            break
        x = x - d
    limit = stalled and best_rn > opts.end_tolerance
    try:
        kkt = float(kkt_residual(description, objective, best_x, 1.0))
    except (ValueError, EvaluationSingularity):
        kkt = math.inf
        limit = True
    return RefineResult(best_x, kkt, limit)
