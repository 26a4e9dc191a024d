"""Best-first branch and bound over warp-parameter boxes.

Each branch carries a box of warp parameters and two numbers from one pass of
the recursive bound evaluation over the (time-sorted) event window:

    lower  objective at the box centre, built incrementally;
    upper  at least the best objective anywhere in the box, built by crediting
           every event with the largest accumulator it could possibly reach.

Branches are popped best-upper-first; the search stops at the first pop whose
own gap closes below the termination threshold, at which point no box anywhere
can beat the incumbent by more than that threshold.
"""

from __future__ import annotations

import heapq
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import count

import numpy as np

from . import _kernels
from .events import EventWindow
from .iwe import AccumulatorImage, ImageGeometry, PixelRect, margin_for_box, round_to_accumulator
from .losses import FocusLoss
from .warps.base import SearchBox, WarpModel

__all__ = [
    "SolverConfig",
    "Branch",
    "BoundEval",
    "SolverResult",
    "argmax_in_rect",
    "subdivide",
    "recursive_bounds",
    "solve",
]


@dataclass(frozen=True)
class SolverConfig:
    """Termination and resource knobs for the search.

    tau: absolute upper-minus-lower gap at which a popped branch terminates
    the search. Splits always bisect every non-floored dimension, so a branch
    spawns 2^d children. resolution_floor_rel stops refinement once a
    dimension shrinks below that fraction of its initial width.
    """

    tau: float
    max_iterations: int = 1_000_000
    thread_count: int = 1
    resolution_floor_rel: float = 1e-4

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.thread_count < 1:
            raise ValueError("thread_count must be >= 1")


@dataclass(frozen=True)
class Branch:
    box: SearchBox
    lower: float
    upper: float
    depth: int = 0

    def __post_init__(self):
        if self.upper < self.lower:
            raise ValueError(f"branch with upper {self.upper} < lower {self.lower}")

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class BoundEval:
    lower: float
    upper: float
    n_invalid: int = 0


@dataclass
class SolverResult:
    theta: np.ndarray
    objective: float
    iterations: int
    gap: float
    converged: bool
    bound_trace: list
    wall_time: float
    n_events: int
    n_invalid: int
    mu: float
    geometry: ImageGeometry

    def trace_array(self) -> np.ndarray:
        """(iteration, upper, best_lower) rows as a float array."""
        return np.asarray(self.bound_trace, dtype=np.float64)


def argmax_in_rect(iwe: AccumulatorImage, rect: PixelRect):
    """Largest count among accumulators whose centres lie in `rect`.

    Returns (count, (ix, iy)). Ties break to the smallest row, then column.
    If no accumulator in range has been touched, returns count 0 at the
    rounded rect centre. A rect that misses the padded grid entirely is a
    configuration error (the margin was sized wrong).
    """
    g = iwe.geometry
    m = g.margin
    x0 = max(math.ceil(rect.x_min), -m)
    x1 = min(math.floor(rect.x_max), g.width - 1 + m)
    y0 = max(math.ceil(rect.y_min), -m)
    y1 = min(math.floor(rect.y_max), g.height - 1 + m)
    if x0 > x1 or y0 > y1:
        raise ValueError("rect contains no accumulator on the padded grid; margin too small")
    sub = iwe.counts[y0 + m:y1 + m + 1, x0 + m:x1 + m + 1]
    q = int(sub.max())
    if q == 0:
        cx, cy = rect.center
        return 0, (int(round_to_accumulator(cx)), int(round_to_accumulator(cy)))
    flat = int(np.argmax(sub))  # row-major: first hit has smallest row, then column
    iy, ix = divmod(flat, sub.shape[1])
    return q, (ix + x0, iy + y0)


def subdivide(box: SearchBox, floors=None) -> list[SearchBox]:
    """Bisect every dimension wider than its floor; 2^d children, exact cover.

    Dimensions at or below their floor are left alone. Returns [] when
    nothing is wide enough to split (the branch retires).
    """
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    mid = 0.5 * (lo + hi)
    if floors is None:
        floors = np.zeros(box.dim)
    split = (hi - lo) > np.asarray(floors)
    if not np.any(split):
        return []
    halves = []
    for i in range(box.dim):
        if split[i]:
            halves.append(((lo[i], mid[i]), (mid[i], hi[i])))
        else:
            halves.append(((lo[i], hi[i]),))
    out = []
    idx = [0] * box.dim

    def rec(d, lo_acc, hi_acc):
        if d == box.dim:
            out.append(SearchBox(tuple(lo_acc), tuple(hi_acc)))
            return
        for seg in halves[d]:
            rec(d + 1, lo_acc + [seg[0]], hi_acc + [seg[1]])

    rec(0, [], [])
    return out


def _branch_inputs(window: EventWindow, warp: WarpModel, box: SearchBox,
                   geometry: ImageGeometry):
    """Per-event kernel inputs for one branch: centre landings and reachable
    accumulator ranges, as padded-grid indices."""
    g = geometry
    m = g.margin
    wp, hp = g.padded_width, g.padded_height
    n = len(window)

    xw, yw = warp.warp(window.x, window.y, window.dt, box.center)
    finite = np.isfinite(xw) & np.isfinite(yw)
    eta_x = np.zeros(n, dtype=np.int64)
    eta_y = np.zeros(n, dtype=np.int64)
    eta_x[finite] = round_to_accumulator(xw[finite]) + m
    eta_y[finite] = round_to_accumulator(yw[finite]) + m
    valid_lo = finite & (eta_x >= 0) & (eta_x < wp) & (eta_y >= 0) & (eta_y < hp)

    x_lo, x_hi, y_lo, y_hi = warp.bbox(window.x, window.y, window.dt, box)
    valid_bb = (np.isfinite(x_lo) & np.isfinite(x_hi)
                & np.isfinite(y_lo) & np.isfinite(y_hi))

    bx0 = np.zeros(n, dtype=np.int64)
    bx1 = np.full(n, wp - 1, dtype=np.int64)
    by0 = np.zeros(n, dtype=np.int64)
    by1 = np.full(n, hp - 1, dtype=np.int64)

    if np.any(valid_bb):
        v = valid_bb
        # a warped position anywhere in the rect rounds into [round(lo), round(hi)]
        rx0 = round_to_accumulator(x_lo[v]) + m
        rx1 = round_to_accumulator(x_hi[v]) + m
        ry0 = round_to_accumulator(y_lo[v]) + m
        ry1 = round_to_accumulator(y_hi[v]) + m
        if np.any(rx0 > wp - 1) or np.any(rx1 < 0) or np.any(ry0 > hp - 1) or np.any(ry1 < 0):
            raise RuntimeError(
                "an event's reachable rect misses the accumulator grid; "
                "the padding margin is too small for this search box")
        # conservative rects may overhang the grid; true warps never do, so
        # clipping is sound
        bx0[v] = np.clip(rx0, 0, wp - 1)
        bx1[v] = np.clip(rx1, 0, wp - 1)
        by0[v] = np.clip(ry0, 0, hp - 1)
        by1[v] = np.clip(ry1, 0, hp - 1)

    return (eta_x, eta_y, valid_lo.astype(np.uint8),
            bx0, bx1, by0, by1, valid_bb.astype(np.uint8))


def _alloc_branch_arrays(n: int):
    """(eta_x, eta_y, valid_lo, bx0, bx1, by0, by1, valid_bb) for n events."""
    return (np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64),
            np.zeros(n, dtype=np.uint8),
            np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64),
            np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64),
            np.zeros(n, dtype=np.uint8))


def recursive_bounds(window: EventWindow, warp: WarpModel, loss: FocusLoss,
                     box: SearchBox, geometry: ImageGeometry,
                     scratch=None, cache=None, inputs_out=None) -> BoundEval:
    """Lower and upper bound of the objective over one parameter box.

    Processes events in temporal order. The lower bound equals the full-image
    objective at the box centre exactly (same rounding, same increments); the
    upper bound credits each event with the maximal already-raised accumulator
    it could reach anywhere in the box, where the upper image is raised over
    every reachable accumulator per event so that it dominates the true IWE of
    every parameter in the box (see the kernel docstring for why raising only
    the argmax accumulator is not sound).

    Models that provide fill_branch_inputs get their per-event geometry from
    a compiled pass (the solver calls this thousands of times); others go
    through the generic vectorised warp/bbox path. `scratch` is an optional
    (up_img, lo_img) int64 pair, zeroed, reused and handed back zeroed;
    `cache`/`inputs_out` likewise let the solver reuse per-window constants
    and per-event index arrays across evaluations.
    """
    filler = getattr(warp, "fill_branch_inputs", None)
    if filler is not None:
        if cache is None:
            cache = warp.branch_cache(window)
        if inputs_out is None:
            inputs_out = _alloc_branch_arrays(len(window))
        filler(cache, box, geometry, inputs_out)
        inputs = inputs_out
    else:
        inputs = _branch_inputs(window, warp, box, geometry)
    if scratch is None:
        up_img = np.zeros((geometry.padded_height, geometry.padded_width),
                          dtype=np.int64)
        lo_img = np.zeros_like(up_img)
    else:
        up_img, lo_img = scratch
    try:
        lo, up, n_inv = _kernels.bound_recursion(
            *inputs, up_img, lo_img,
            loss.code, loss.delta, loss.w1, loss.w2, float(loss.n_p), loss.mu)
    except Exception:
        if scratch is not None:
            up_img[:] = 0
            lo_img[:] = 0
        raise
    l0 = loss.initial_value()
    return BoundEval(lower=l0 + lo, upper=l0 + up, n_invalid=int(n_inv))


def _resolve_loss(loss, geometry: ImageGeometry, n_events: int) -> FocusLoss:
    if isinstance(loss, FocusLoss):
        if loss.n_p != geometry.n_accumulators:
            raise ValueError("loss was bound to a different accumulator grid")
        return loss
    if isinstance(loss, str):
        return FocusLoss.bind(loss, geometry, n_events)
    raise TypeError(f"loss must be a FocusLoss or kind string, got {type(loss)}")


def solve(window: EventWindow, warp: WarpModel, loss, init_box: SearchBox,
          config: SolverConfig, sensor_size=None, geometry: ImageGeometry = None,
          loss_kwargs: dict = None) -> SolverResult:
    """Globally optimal contrast maximisation over `init_box`.

    Pass either `sensor_size` (width, height) -- the padding margin is then
    sized from the initial box so no event can leave the grid during the
    search -- or a ready-made `geometry`. A string `loss` is bound to the
    grid and event count here; `loss_kwargs` feeds delta/w1/w2 through.

    The returned objective is exactly the full-image objective at the
    returned parameters. `converged` is False only when the iteration cap
    stopped the search first.
    """
    t_start = time.perf_counter()
    warp.validate_box(init_box, max_dt=float(window.duration))

    if geometry is None:
        if sensor_size is None:
            raise ValueError("pass sensor_size=(width, height) or an explicit geometry")
        width, height = sensor_size
        margin = margin_for_box(window, warp, init_box, width, height)
        geometry = ImageGeometry(width=width, height=height, margin=margin)
    if isinstance(loss, str) and loss_kwargs:
        loss = FocusLoss.bind(loss, geometry, len(window), **loss_kwargs)
    loss = _resolve_loss(loss, geometry, len(window))

    floors = config.resolution_floor_rel * init_box.widths

    pool = None
    if config.thread_count > 1:
        pool = ThreadPoolExecutor(max_workers=config.thread_count)

    tls = threading.local()
    shape = (geometry.padded_height, geometry.padded_width)
    cache = None
    if getattr(warp, "fill_branch_inputs", None) is not None:
        cache = warp.branch_cache(window)

    def bounds_of(box: SearchBox) -> BoundEval:
        scratch = getattr(tls, "scratch", None)
        if scratch is None:
            scratch = (np.zeros(shape, dtype=np.int64), np.zeros(shape, dtype=np.int64))
            tls.scratch = scratch
            tls.inputs = _alloc_branch_arrays(len(window)) if cache is not None else None
        return recursive_bounds(window, warp, loss, box, geometry,
                                scratch=scratch, cache=cache, inputs_out=tls.inputs)

    try:
        seq = count()
        root = bounds_of(init_box)
        incumbent_theta = init_box.center
        incumbent_val = root.lower
        n_invalid = root.n_invalid
        heap = []

        def push(branch: Branch):
            # max-heap by upper bound; tie-break deeper first, then centre
            key = (-branch.upper, -branch.depth, tuple(branch.box.center), next(seq))
            heapq.heappush(heap, (key, branch))

        push(Branch(init_box, root.lower, root.upper, depth=0))
        trace = []
        iterations = 0
        converged = False
        gap = math.inf

        while heap and iterations < config.max_iterations:
            _, br = heapq.heappop(heap)
            iterations += 1
            if br.lower >= incumbent_val:
                incumbent_theta = br.box.center
                incumbent_val = br.lower
            trace.append((iterations, br.upper, incumbent_val))
            if br.gap <= config.tau:
                converged = True
                gap = br.upper - incumbent_val
                break
            children = subdivide(br.box, floors)
            if not children:
                continue
            if pool is not None:
                evals = list(pool.map(bounds_of, children))
            else:
                evals = [bounds_of(c) for c in children]
            for child, ev in zip(children, evals):
                if ev.upper >= incumbent_val:
                    push(Branch(child, ev.lower, ev.upper, depth=br.depth + 1))
        else:
            if heap:
                gap = -heap[0][0][0] - incumbent_val  # best remaining upper
                converged = False
            else:
                gap = 0.0
                converged = True
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    return SolverResult(
        theta=np.asarray(incumbent_theta),
        objective=incumbent_val,
        iterations=iterations,
        gap=max(gap, 0.0),
        converged=converged,
        bound_trace=trace,
        wall_time=time.perf_counter() - t_start,
        n_events=len(window),
        n_invalid=n_invalid,
        mu=loss.mu,
        geometry=geometry,
    )
