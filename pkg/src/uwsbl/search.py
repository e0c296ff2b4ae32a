"""Grid search followed by derivative-free local refinement.

Every estimator in this package is expressed as a batched objective
``f(points) -> values`` where ``points`` is a (P, 3) array and degenerate
candidates evaluate to NaN. The helpers here turn such a function into a
position estimate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

log = logging.getLogger(__name__)

BatchObjective = Callable[[np.ndarray], np.ndarray]


class EstimationFailure(RuntimeError):
    """No usable candidate on the grid."""


@dataclass(frozen=True)
class SearchGrid:
    """Axis-aligned box sampled on a regular lattice, or an explicit point list.

    ``steps`` holds the lattice spacing per axis; an axis with ``lower == upper``
    is held fixed (e.g. a known-depth plane).
    """

    lower: np.ndarray
    upper: np.ndarray
    steps: np.ndarray | None = None
    explicit: np.ndarray | None = None
    axes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(3)
        hi = np.asarray(self.upper, dtype=float).reshape(3)
        if np.any(hi < lo):
            raise ValueError("grid upper bound below lower bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.explicit is not None:
            pts = np.asarray(self.explicit, dtype=float).reshape(-1, 3)
            if len(pts) == 0:
                raise ValueError("empty grid")
            if np.any(pts < lo - 1e-9) or np.any(pts > hi + 1e-9):
                raise ValueError("explicit grid points must lie inside the box")
            object.__setattr__(self, "explicit", pts)
            object.__setattr__(self, "axes", ())
            return
        if self.steps is None:
            raise ValueError("either steps or explicit points are required")
        st = np.asarray(self.steps, dtype=float).reshape(3)
        axes = []
        for a, b, d in zip(lo, hi, st):
            if b == a:
                axes.append(np.array([a]))
                continue
            if not d > 0:
                raise ValueError("grid steps must be positive")
            n = int(np.floor((b - a) / d + 1e-9)) + 1
            axes.append(a + d * np.arange(n))
        object.__setattr__(self, "steps", st)
        object.__setattr__(self, "axes", tuple(axes))

    @classmethod
    def around(cls, center, half_width, steps, depth_limits=None) -> "SearchGrid":
        """Box ``center +/- half_width`` snapped so that ``center`` is a lattice point."""
        c = np.asarray(center, dtype=float)
        hw = np.broadcast_to(np.asarray(half_width, dtype=float), (3,))
        st = np.broadcast_to(np.asarray(steps, dtype=float), (3,))
        n = np.floor(hw / st + 1e-9)
        lo, hi = c - n * st, c + n * st
        if depth_limits is not None:
            zmin, zmax = depth_limits
            k_lo = np.floor((c[2] - zmin) / st[2] + 1e-9)
            k_hi = np.floor((zmax - c[2]) / st[2] + 1e-9)
            lo[2] = max(lo[2], c[2] - k_lo * st[2])
            hi[2] = min(hi[2], c[2] + k_hi * st[2])
        return cls(lo, hi, st)

    @property
    def shape(self) -> tuple:
        if self.explicit is not None:
            return (len(self.explicit),)
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        """All grid points as a (P, 3) array in C (x-major) order."""
        if self.explicit is not None:
            return self.explicit
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def check_depth(self, bottom_depth: float) -> None:
        if self.lower[2] < 0 or self.upper[2] > bottom_depth:
            raise ValueError("grid extends outside the water column")


@dataclass(frozen=True)
class RefineOptions:
    enabled: bool = True
    xatol: float = 1e-6
    fatol: float = 0.0
    max_iter: int = 200
    n_starts: int = 1
    initial_step: float | None = None  # defaults to the grid spacing


@dataclass
class LocalizationResult:
    estimate: np.ndarray
    grid_maximizer: np.ndarray
    objective_at_estimate: float
    objective_at_grid_maximizer: float
    iterations: int = 0
    converged: bool = True
    n_skipped: int = 0
    objective_map: np.ndarray | None = None


def evaluate_grid(objective: BatchObjective, grid: SearchGrid, chunk: int = 4096) -> np.ndarray:
    pts = grid.points()
    out = np.empty(len(pts))
    for i in range(0, len(pts), chunk):
        out[i:i + chunk] = objective(pts[i:i + chunk])
    return out


def _local_maxima(values: np.ndarray, shape: tuple) -> np.ndarray:
    """Linear indices of lattice points not exceeded by any face neighbour."""
    v = np.where(np.isfinite(values), values, -np.inf).reshape(shape)
    keep = np.isfinite(v)
    for ax in range(v.ndim):
        if v.shape[ax] == 1:
            continue
        pad = [(0, 0)] * v.ndim
        pad[ax] = (1, 1)
        vp = np.pad(v, pad, constant_values=-np.inf)
        sl_lo = [slice(None)] * v.ndim
        sl_hi = [slice(None)] * v.ndim
        sl_lo[ax] = slice(0, -2)
        sl_hi[ax] = slice(2, None)
        keep &= (v >= vp[tuple(sl_lo)]) & (v >= vp[tuple(sl_hi)])
    return np.flatnonzero(keep.ravel())


def refine_point(
    objective: BatchObjective,
    start: np.ndarray,
    f_start: float,
    lower: np.ndarray,
    upper: np.ndarray,
    options: RefineOptions,
    scale: np.ndarray,
) -> tuple[np.ndarray, float, int, bool]:
    """Bounded Nelder-Mead ascent from ``start``; never returns a worse point."""
    free = upper > lower
    if not np.any(free):
        return start, f_start, 0, True
    x0 = start[free]

    def neg(y):
        p = start.copy()
        p[free] = np.clip(y, lower[free], upper[free])
        val = objective(p[None, :])[0]
        return -val if np.isfinite(val) else np.inf

    step = scale[free]
    simplex = np.vstack([x0] + [x0 + np.eye(len(x0))[i] * step[i] * 0.5 for i in range(len(x0))])
    # reflect vertices that leave the box back inside
    for i in range(1, len(simplex)):
        j = i - 1
        if simplex[i, j] > upper[free][j]:
            simplex[i, j] = x0[j] - step[j] * 0.5
    res = minimize(
        neg,
        x0,
        method="Nelder-Mead",
        bounds=list(zip(lower[free], upper[free])),
        options={
            "xatol": options.xatol,
            "fatol": options.fatol,
            "maxiter": options.max_iter,
            "initial_simplex": simplex,
        },
    )
    p = start.copy()
    p[free] = np.clip(res.x, lower[free], upper[free])
    f = -res.fun
    if not (np.isfinite(f) and f >= f_start):
        return start, f_start, int(res.nit), bool(res.success)
    return p, float(f), int(res.nit), bool(res.success)


def localize(
    objective: BatchObjective,
    grid: SearchGrid,
    refine: RefineOptions | None = None,
    keep_map: bool = False,
) -> LocalizationResult:
    """Coarse grid search, then local refinement inside the grid box."""
    refine = RefineOptions() if refine is None else refine
    values = evaluate_grid(objective, grid)
    finite = np.isfinite(values)
    n_skipped = int(np.sum(~finite))
    if n_skipped:
        log.info("skipped %d degenerate grid points", n_skipped)
    if not np.any(finite):
        raise EstimationFailure("every grid point was degenerate")
    pts = grid.points()
    best = int(np.nanargmax(values))
    if np.sum(values[finite] == values[best]) > 1:
        log.info("grid tie at max value %g, keeping lowest index %d", values[best], best)
    grid_max = pts[best]
    f_grid = float(values[best])

    estimate, f_est, iters, conv = grid_max.copy(), f_grid, 0, True
    if refine.enabled:
        if refine.initial_step is not None:
            scale = np.full(3, float(refine.initial_step))
        elif grid.steps is not None:
            scale = np.where(grid.steps > 0, grid.steps, 1.0)
        else:
            scale = np.maximum((grid.upper - grid.lower) / 10, 1e-3)
        starts = [best]
        if refine.n_starts > 1 and grid.explicit is None:
            cand = _local_maxima(values, grid.shape)
            cand = cand[np.argsort(-values[cand], kind="stable")]
            starts += [int(i) for i in cand if i != best][: refine.n_starts - 1]
        for i in starts:
            p, f, it, ok = refine_point(
                objective, pts[i].copy(), float(values[i]), grid.lower, grid.upper, refine, scale
            )
            iters += it
            if f > f_est:
                estimate, f_est, conv = p, f, ok
            elif i == best:
                conv = ok
    return LocalizationResult(
        estimate=estimate,
        grid_maximizer=grid_max,
        objective_at_estimate=f_est,
        objective_at_grid_maximizer=f_grid,
        iterations=iters,
        converged=conv,
        n_skipped=n_skipped,
        objective_map=values.reshape(grid.shape) if keep_map else None,
    )
