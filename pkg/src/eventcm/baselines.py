"""Reference solvers the branch-and-bound results are judged against.

`exhaustive_search` enumerates a dense parameter grid and is the ground-truth
oracle in the test suite. `local_ascent` is the classic alternative: gradient
steps on a Gaussian-smoothed IWE, which is fast but happily walks into local
optima; it reports the unsmoothed objective so comparisons against the global
solver are apples to apples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .events import EventWindow
from .iwe import ImageGeometry, PixelRect, accumulate, margin_for_box, round_to_accumulator
from .losses import FocusLoss
from .warps.ackermann import AckermannWarp
from .warps.base import SearchBox, WarpModel
from .warps.flow import FlowWarp
from .warps.rotation import RotationWarp

__all__ = [
    "GridSpec",
    "ExhaustiveResult",
    "exhaustive_search",
    "batch_objectives",
    "SmoothedIWE",
    "smooth_accumulate",
    "LocalAscentResult",
    "local_ascent",
]

MAX_GRID_CELLS = 10_000_000


@dataclass(frozen=True)
class GridSpec:
    """Per-dimension inclusive range and step of an exhaustive grid."""

    lo: tuple
    hi: tuple
    step: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        step = tuple(float(v) for v in np.atleast_1d(self.step))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "step", step)
        if not (len(lo) == len(hi) == len(step)):
            raise ValueError("lo/hi/step must share a dimension")
        if any(s <= 0 for s in step):
            raise ValueError("grid steps must be positive")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError("empty grid range")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def axes(self) -> list[np.ndarray]:
        out = []
        for l, h, s in zip(self.lo, self.hi, self.step):
            n = int(round((h - l) / s)) + 1
            out.append(l + s * np.arange(n))
        return out

    @property
    def n_cells(self) -> int:
        return int(np.prod([a.size for a in self.axes()]))

    def box(self) -> SearchBox:
        return SearchBox(self.lo, self.hi)


@dataclass
class ExhaustiveResult:
    theta: np.ndarray
    value: float
    values: np.ndarray  # objective per grid point, C-order over the axes
    geometry: ImageGeometry


def _loss_args(loss: FocusLoss):
    return loss.code, loss.delta, loss.w1, loss.w2, loss.mu


def batch_objectives(window: EventWindow, warp: WarpModel, loss: FocusLoss,
                     thetas: np.ndarray, geometry: ImageGeometry) -> np.ndarray:
    """Full-image objective at many parameter vectors (one enumeration pass).

    Agrees with evaluate(accumulate(...)) point for point; it exists because
    calling that pair thousands of times per instance is too slow.
    """
    g = geometry
    thetas = np.ascontiguousarray(np.atleast_2d(np.asarray(thetas, dtype=np.float64)))
    if isinstance(warp, FlowWarp):
        return _kernels.objectives_flow(
            window.x, window.y, window.dt, thetas,
            g.width, g.height, g.margin, *_loss_args(loss))
    if isinstance(warp, AckermannWarp):
        rig = warp.rig
        fd = rig.f / rig.d
        a = window.y - rig.v0 + rig.l * fd
        b = window.x - rig.u0
        return _kernels.objectives_ackermann(
            a, b, window.dt, thetas, fd, rig.u0, -rig.l * fd + rig.v0,
            g.width, g.height, g.margin, *_loss_args(loss))
    if isinstance(warp, RotationWarp):
        bearings = warp.intrinsics.bearings(window.x, window.y)
        return _kernels.objectives_rotation(
            np.ascontiguousarray(bearings), window.dt, thetas,
            warp.intrinsics.f, warp.intrinsics.u0, warp.intrinsics.v0,
            g.width, g.height, g.margin, *_loss_args(loss))
    raise TypeError(f"no enumeration kernel for warp model {type(warp).__name__}")


def exhaustive_search(window: EventWindow, warp: WarpModel, loss, grid: GridSpec,
                      sensor_size=None, geometry: ImageGeometry = None) -> ExhaustiveResult:
    """Evaluate the objective at every grid point and return the maximum.

    Ties go to the first maximum in row-major order over the grid axes, which
    keeps oracle runs reproducible.
    """
    if grid.n_cells > MAX_GRID_CELLS:
        raise ValueError(f"grid has {grid.n_cells} cells, above the {MAX_GRID_CELLS} guard")
    if geometry is None:
        if sensor_size is None:
            raise ValueError("pass sensor_size=(width, height) or an explicit geometry")
        width, height = sensor_size
        margin = margin_for_box(window, warp, grid.box(), width, height)
        geometry = ImageGeometry(width=width, height=height, margin=margin)
    if isinstance(loss, str):
        loss = FocusLoss.bind(loss, geometry, len(window))

    axes = grid.axes()
    if isinstance(warp, AckermannWarp) and grid.dim == 2:
        # omega-major product kernel: hoists trig out of the speed loop
        rig = warp.rig
        fd = rig.f / rig.d
        a = window.y - rig.v0 + rig.l * fd
        b = window.x - rig.u0
        values = _kernels.objectives_ackermann_grid(
            a, b, window.dt, axes[0], axes[1], fd, rig.u0, -rig.l * fd + rig.v0,
            geometry.width, geometry.height, geometry.margin, *_loss_args(loss))
        flat = values.ravel()
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        thetas = np.stack([m.ravel() for m in mesh], axis=1)
        flat = batch_objectives(window, warp, loss, thetas, geometry)
        values = flat.reshape([a.size for a in axes])
    best = int(np.argmax(flat))  # first max in C order
    idx = np.unravel_index(best, values.shape)
    theta = np.array([axes[d][idx[d]] for d in range(grid.dim)])
    return ExhaustiveResult(theta=theta, value=float(flat[best]), values=values,
                            geometry=geometry)


# ---------------------------------------------------------------------------
# smoothed IWE and local ascent
# ---------------------------------------------------------------------------


@dataclass
class SmoothedIWE:
    """Real-valued IWE where each event deposits a truncated Gaussian."""

    values: np.ndarray
    sigma: float
    geometry: ImageGeometry
    n_dropped: int = 0

    @property
    def mass(self) -> float:
        return float(self.values.sum())


def smooth_accumulate(window: EventWindow, warp: WarpModel, theta, sigma: float,
                      geometry: ImageGeometry) -> SmoothedIWE:
    """Deposit a +-3 sigma Gaussian stencil per event at its warped position.

    Each stencil is normalised over its in-grid cells, so total mass equals
    the number of non-dropped events exactly.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    g = geometry
    grid = np.zeros((g.padded_height, g.padded_width))
    n = len(window)
    if n == 0:
        return SmoothedIWE(grid, sigma, g)
    xw, yw = warp.warp(window.x, window.y, window.dt, np.asarray(theta, dtype=np.float64))
    ok = np.isfinite(xw) & np.isfinite(yw)
    cx = np.zeros(n, dtype=np.int64)
    cy = np.zeros(n, dtype=np.int64)
    cx[ok] = round_to_accumulator(xw[ok])
    cy[ok] = round_to_accumulator(yw[ok])
    ok &= g.in_grid(cx, cy)
    xw, yw, cx, cy = xw[ok], yw[ok], cx[ok], cy[ok]

    r = int(math.ceil(3.0 * sigma))
    offs = np.arange(-r, r + 1)
    ox, oy = np.meshgrid(offs, offs, indexing="xy")
    ox = ox.ravel()[None, :]
    oy = oy.ravel()[None, :]
    gx = cx[:, None] + ox
    gy = cy[:, None] + oy
    w = np.exp(-((gx - xw[:, None]) ** 2 + (gy - yw[:, None]) ** 2) / (2.0 * sigma * sigma))
    inside = g.in_grid(gx, gy)
    w = np.where(inside, w, 0.0)
    w /= w.sum(axis=1, keepdims=True)
    m = g.margin
    np.add.at(grid, (np.clip(gy + m, 0, g.padded_height - 1),
                     np.clip(gx + m, 0, g.padded_width - 1)), w)
    return SmoothedIWE(grid, sigma, g, n_dropped=int(n - xw.size))


@dataclass
class LocalAscentResult:
    theta: np.ndarray
    objective: float        # unsmoothed, for fair comparison with the solver
    smoothed_objective: float
    n_steps: int
    failed: bool = False


def local_ascent(window: EventWindow, warp: WarpModel, loss, theta_init,
                 sigma: float, geometry: ImageGeometry,
                 fd_steps=None, initial_step: float = None, bounds: SearchBox = None,
                 grad_tol: float = 1e-6, max_steps: int = 200) -> LocalAscentResult:
    """Backtracking gradient ascent on the smoothed objective.

    Gradients come from central finite differences with per-dimension step
    `fd_steps`. Stops when the gradient norm drops under `grad_tol` (scaled by
    the step) or steps run out. The reported objective is the unsmoothed one
    at the final parameters.
    """
    if isinstance(loss, str):
        loss = FocusLoss.bind(loss, geometry, len(window))
    theta = np.asarray(theta_init, dtype=np.float64).copy()
    dim = theta.size
    if fd_steps is None:
        fd_steps = np.full(dim, 1e-3)
    fd_steps = np.asarray(fd_steps, dtype=np.float64)
    if initial_step is None:
        initial_step = 1.0

    def clamp(t):
        if bounds is None:
            return t
        return np.clip(t, bounds.lo, bounds.hi)

    def smoothed(t):
        return loss.evaluate(smooth_accumulate(window, warp, t, sigma, geometry).values)

    theta = clamp(theta)
    try:
        value = smoothed(theta)
        step = float(initial_step)
        n_steps = 0
        for _ in range(max_steps):
            grad = np.zeros(dim)
            for i in range(dim):
                e = np.zeros(dim)
                e[i] = fd_steps[i]
                grad[i] = (smoothed(theta + e) - smoothed(theta - e)) / (2.0 * fd_steps[i])
            gnorm = float(np.linalg.norm(grad))
            if not math.isfinite(gnorm):
                return LocalAscentResult(theta, float("nan"), value, n_steps, failed=True)
            if gnorm < grad_tol:
                break
            direction = grad / gnorm
            moved = False
            while step > 1e-12:
                cand = clamp(theta + step * fd_steps * direction)
                cand_val = smoothed(cand)
                if math.isfinite(cand_val) and cand_val > value:
                    theta, value = cand, cand_val
                    n_steps += 1
                    step *= 1.5
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
    except (OverflowError, FloatingPointError):
        return LocalAscentResult(theta, float("nan"), float("nan"), 0, failed=True)

    discrete = loss.evaluate(accumulate(window, warp, theta, geometry))
    return LocalAscentResult(theta=theta, objective=float(discrete),
                             smoothed_objective=float(value), n_steps=n_steps)
