"""Independent verification oracles.

Closed-form optima, KKT residuals, brute-force grid maximization in the
plane, and rejection sampling of feasible points.  Nothing here goes through
the path tracker, so agreement between the two routes is meaningful.
"""

from __future__ import annotations

import numpy as np

from .descriptions import HomotopyDescription
from .objectives import Objective

GRID_CHUNK = 200_000


def holder_optimum(w, p: int, r: float) -> tuple[np.ndarray, float]:
    """Maximizer and value of w . x over the p-norm ball of radius r.

    With the dual exponent q = p/(p-1):
        x*_i = r * sign(w_i) |w_i|^(q-1) / ||w||_q^(q-1),  value = r ||w||_q.
    """
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        raise ValueError("the functional must be nonzero")
    if int(p) != p or p < 2 or p % 2:
        raise ValueError("the norm exponent must be an even integer >= 2")
    if r <= 0:
        raise ValueError("radius must be positive")
    q = p / (p - 1)
    norm_q = float(np.sum(np.abs(w) ** q) ** (1.0 / q))
    x = r * np.sign(w) * np.abs(w) ** (q - 1) / norm_q ** (q - 1)
    return x, r * norm_q


def kkt_residual(description: HomotopyDescription, objective: Objective, x,
                 t: float = 1.0) -> float:
    """max(|p_t(x)|, normalized non-parallelism of grad f and grad p).

    The multiplier is the least-squares fit (grad f . grad p)/||grad p||^2,
    which stays well defined when individual gradient components vanish.
    """
    x = np.asarray(x, dtype=float)
    de = description.evaluate(t, x)
    fe = objective.evaluate(t, x)
    gp, gf = de.grad, fe.grad
    denom = float(gp @ gp)
    if denom == 0.0:
        raise ValueError("constraint gradient vanishes; KKT residual undefined")
    lam = float(gf @ gp) / denom
    parallel = float(np.max(np.abs(gf - lam * gp))) / float(np.max(np.abs(gf)))
    return max(abs(de.value), parallel)


def grid_maximizer_2d(description: HomotopyDescription, objective: Objective,
                      box, resolution: int, t: float = 1.0) -> tuple[np.ndarray, float]:
    """Brute-force maximizer over a regular grid of the plane.

    Scans the box at the target time, keeps points with nonnegative
    description value, and returns the best feasible grid point; ties go to
    the lexicographically smallest grid index (first match in row-major
    order).  The value error is O(box width / resolution).
    """
    if description.n_vars != 2:
        raise ValueError("the grid oracle only supports two variables")
    (x_lo, x_hi), (y_lo, y_hi) = box
    xs = np.linspace(x_lo, x_hi, resolution)
    ys = np.linspace(y_lo, y_hi, resolution)
    best_val = -np.inf
    best_point = None
    rows_per_chunk = max(1, GRID_CHUNK // resolution)
    for start in range(0, resolution, rows_per_chunk):
        stop = min(resolution, start + rows_per_chunk)
        gx, gy = np.meshgrid(xs[start:stop], ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        feasible = description.value_many(t, pts) >= 0.0
        if not np.any(feasible):
            continue
        vals = objective.value_many(t, pts)
        vals[~feasible] = -np.inf
        idx = int(np.argmax(vals))
        if vals[idx] > best_val:
            best_val = float(vals[idx])
            best_point = pts[idx].copy()
    if best_point is None:
        raise ValueError("no feasible grid point inside the box")
    return best_point, best_val


def sample_feasible(description: HomotopyDescription, count: int, box,
                    rng: np.random.Generator, t: float = 1.0,
                    max_batches: int = 2000) -> np.ndarray:
    """Rejection-sample ``count`` points of {x : p_t(x) >= 0} uniformly from
    the box."""
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    n = lo.shape[0]
    out = []
    have = 0
    for _ in range(max_batches):
        pts = rng.uniform(lo, hi, size=(max(count, 1024), n))
        keep = pts[description.value_many(t, pts) >= 0.0]
        if keep.size:
            out.append(keep)
            have += keep.shape[0]
        if have >= count:
            break
    if have < count:
        raise ValueError("rejection sampling failed to find enough feasible points")
    return np.vstack(out)[:count]


def boundary_rays_2d(description: HomotopyDescription, t: float, n_rays: int = 720,
                     r_max: float = 1e3, iters: int = 60) -> np.ndarray:
    """Boundary polyline of a star-shaped planar set by bisection along rays
    from the origin.  Rays with no sign change inside r_max are skipped
    (unbounded directions); returns an (m, 2) polyline in angle order."""
    if description.n_vars != 2:
        raise ValueError("boundary sampling only supports two variables")
    angles = np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])

    # doubling search for a sign change along every ray at once
    lo = np.zeros(n_rays)
    hi = np.full(n_rays, 1e-3)
    active = np.ones(n_rays, dtype=bool)
    found = np.zeros(n_rays, dtype=bool)
    while np.any(active):
        vals = description.value_many(t, dirs[active] * hi[active, None])
        crossed = vals < 0.0
        idx = np.flatnonzero(active)
        found[idx[crossed]] = True
        active[idx[crossed]] = False
        keep = idx[~crossed]
        lo[keep] = hi[keep]
        hi[keep] *= 2.0
        too_far = keep[hi[keep] > r_max]
        active[too_far] = False
    if not np.any(found):
        return np.zeros((0, 2))
    d = dirs[found]
    a = lo[found]
    b = hi[found]
    for _ in range(iters):
        mid = 0.5 * (a + b)
        inside = description.value_many(t, d * mid[:, None]) >= 0.0
        a = np.where(inside, mid, a)
        b = np.where(inside, b, mid)
    radius = 0.5 * (a + b)
    return d * radius[:, None]
