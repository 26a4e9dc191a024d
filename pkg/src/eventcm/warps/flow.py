"""Constant-velocity optical flow warp."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import SearchBox, WarpModel

__all__ = ["FlowParams", "FlowWarp"]


@dataclass(frozen=True)
class FlowParams:
    """Pixel velocity of a patch, px/s."""

    vx: float
    vy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy])


class FlowWarp(WarpModel):
    """x' = x + v * dt. The bounding rectangle over a velocity box is exact."""

    dim = 2
    name = "flow"

    def __init__(self, intrinsics=None):
        # only synthetic-event generation needs a camera; the warp itself is image-space
        self.intrinsics = intrinsics

    def warp(self, x, y, dt, theta):
        vx, vy = float(theta[0]), float(theta[1])
        return np.asarray(x) + vx * np.asarray(dt), np.asarray(y) + vy * np.asarray(dt)

    def bbox(self, x, y, dt, box: SearchBox):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        dt = np.asarray(dt, dtype=np.float64)
        vx_lo, vy_lo = box.lo
        vx_hi, vy_hi = box.hi
        # dt >= 0, so interval endpoints map directly
        return (x + vx_lo * dt, x + vx_hi * dt,
                y + vy_lo * dt, y + vy_hi * dt)

    # compiled fast path for the solver's per-branch geometry
    def branch_cache(self, window):
        return (window.x, window.y, window.dt)

    def fill_branch_inputs(self, cache, box, geometry, out):
        from .. import _kernels
        x, y, dt = cache
        _kernels.branch_inputs_flow(
            x, y, dt, box.lo[0], box.hi[0], box.lo[1], box.hi[1],
            geometry.margin, geometry.padded_width, geometry.padded_height, *out)
