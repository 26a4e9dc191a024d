"""Image of warped events: accumulator grid, rounding, accumulation.

The accumulator grid is the sensor area plus a padding margin on every side.
The margin is sized from the initial search space so that no event can warp
(or round) outside the grid while the solver runs; clipping inside the bound
recursion would invalidate the max-accumulator argument, so it is forbidden
there and only plain `accumulate` tolerates (and tallies) dropped events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PixelRect",
    "ImageGeometry",
    "AccumulatorImage",
    "round_to_accumulator",
    "accumulate",
    "margin_for_box",
]


@dataclass(frozen=True)
class PixelRect:
    """Axis-aligned rectangle in continuous pixel coordinates."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"empty rect: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def contains(self, x: float, y: float, slack: float = 0.0) -> bool:
        return (self.x_min - slack <= x <= self.x_max + slack
                and self.y_min - slack <= y <= self.y_max + slack)


@dataclass(frozen=True)
class ImageGeometry:
    """Sensor size plus padding margin; defines the accumulator grid.

    Accumulators sit at integer pixel coordinates. Valid coordinates span
    [-margin, width-1+margin] x [-margin, height-1+margin]; array storage is
    offset by +margin.
    """

    width: int
    height: int
    margin: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image geometry must have positive width and height")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")

    @property
    def padded_width(self) -> int:
        return self.width + 2 * self.margin

    @property
    def padded_height(self) -> int:
        return self.height + 2 * self.margin

    @property
    def n_accumulators(self) -> int:
        return self.padded_width * self.padded_height

    def in_grid(self, ix, iy):
        """Vectorised test: does accumulator (ix, iy) exist on the padded grid?"""
        m = self.margin
        return ((ix >= -m) & (ix <= self.width - 1 + m)
                & (iy >= -m) & (iy <= self.height - 1 + m))


@dataclass
class AccumulatorImage:
    """Integer count grid over the padded accumulator lattice.

    `counts[iy + margin, ix + margin]` is the accumulator at pixel (ix, iy).
    `n_dropped` tallies events whose rounded warp fell off the padded grid
    (or was invalid for the warp model).
    """

    geometry: ImageGeometry
    counts: np.ndarray = None
    n_dropped: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.geometry.padded_height, self.geometry.padded_width),
                                   dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            expected = (self.geometry.padded_height, self.geometry.padded_width)
            if self.counts.shape != expected:
                raise ValueError(f"counts shape {self.counts.shape} != padded shape {expected}")

    @property
    def n_p(self) -> int:
        return self.geometry.n_accumulators

    def count_at(self, ix: int, iy: int) -> int:
        m = self.geometry.margin
        return int(self.counts[iy + m, ix + m])

    def core(self) -> np.ndarray:
        """The sensor-visible (unpadded) region of the count grid."""
        m = self.geometry.margin
        if m == 0:
            return self.counts
        return self.counts[m:-m, m:-m]


def round_to_accumulator(p):
    """Nearest accumulator, rounding halves away from zero in each coordinate.

    Accepts a scalar pair or arrays; returns int64. The same rule is used by
    the bound recursion, plain accumulation, and the enumeration oracles --
    the lower-bound equality only holds if rounding is consistent everywhere.
    """
    a = np.asarray(p, dtype=np.float64)
    r = np.trunc(a + np.copysign(0.5, a))
    return r.astype(np.int64)


def accumulate(window, warp, theta, geometry: ImageGeometry) -> AccumulatorImage:
    """Build the IWE: warp every event to the reference view and count per cell.

    Events whose warp is invalid (model-dependent) or whose rounded position
    leaves the padded grid are dropped and tallied. Order-free by construction.
    """
    image = AccumulatorImage(geometry)
    n = len(window)
    if n == 0:
        return image
    xw, yw = warp.warp(window.x, window.y, window.dt, theta)
    ok = np.isfinite(xw) & np.isfinite(yw)
    ix = np.zeros(n, dtype=np.int64)
    iy = np.zeros(n, dtype=np.int64)
    ix[ok] = round_to_accumulator(xw[ok])
    iy[ok] = round_to_accumulator(yw[ok])
    ok &= geometry.in_grid(ix, iy)
    m = geometry.margin
    np.add.at(image.counts, (iy[ok] + m, ix[ok] + m), 1)
    image.n_dropped = int(n - np.count_nonzero(ok))
    return image


def margin_for_box(window, warp, box, width: int, height: int) -> int:
    """Padding that keeps every event's warp inside the grid over a search box.

    Takes the per-event bounding rectangles over `box`, measures the largest
    excursion past the sensor edges, and adds the rounding half-quantum. With
    this margin no rect (and no rounded warp) leaves the padded grid for any
    sub-box, which the bound recursion relies on.
    """
    if len(window) == 0:
        return 1
    x_min, x_max, y_min, y_max = warp.bbox(window.x, window.y, window.dt, box)
    ok = np.isfinite(x_min) & np.isfinite(x_max) & np.isfinite(y_min) & np.isfinite(y_max)
    if not np.any(ok):
        return 1
    excess = max(
        float(np.max(-x_min[ok], initial=0.0)),
        float(np.max(x_max[ok] - (width - 1), initial=0.0)),
        float(np.max(-y_min[ok], initial=0.0)),
        float(np.max(y_max[ok] - (height - 1), initial=0.0)),
        0.0,
    )
    return int(np.ceil(excess + 0.5)) + 1
