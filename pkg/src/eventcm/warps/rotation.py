"""Pure camera rotation at constant angular velocity.

Events are lifted to unit bearing vectors, rotated back to the reference
frame by the exponential map of omega * dt, and reprojected. Over an angular
velocity box the rotated bearing stays inside a cone around the centre
rotation, with half-angle half the box diagonal scaled by dt; the cone's
image on the pixel plane is an ellipse. We bound that ellipse by a rectangle:
project a ring of samples on the cone boundary and inflate by a bound on how
far the curve can wander between samples. Containment is guaranteed, only
tightness depends on the sample count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import CameraIntrinsics, rotate_vectors
from .base import SearchBox, WarpModel

__all__ = ["RotationParams", "ConeBound", "RotationWarp"]


@dataclass(frozen=True)
class RotationParams:
    """Constant angular velocity, rad/s."""

    wx: float
    wy: float
    wz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.wx, self.wy, self.wz])


@dataclass(frozen=True)
class ConeBound:
    """Per-event cone of reachable bearings: unit axis and half-angle (rad)."""

    axis: np.ndarray
    half_angle: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=np.float64)
        n = float(np.linalg.norm(a))
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"cone axis must be unit length, |axis| = {n}")
        if self.half_angle < 0:
            raise ValueError("half angle must be non-negative")
        object.__setattr__(self, "axis", a)


class RotationWarp(WarpModel):

    dim = 3
    name = "rotation"

    def __init__(self, intrinsics: CameraIntrinsics, n_ring_samples: int = 16):
        if n_ring_samples < 4:
            raise ValueError("need at least 4 ring samples")
        self.intrinsics = intrinsics
        self.n_ring_samples = n_ring_samples

    def warp(self, x, y, dt, theta):
        """Rotate bearings by omega*dt and reproject; NaN when behind the camera."""
        omega = np.asarray(theta, dtype=np.float64)
        dt = np.atleast_1d(np.asarray(dt, dtype=np.float64))
        f = self.intrinsics.bearings(np.atleast_1d(x), np.atleast_1d(y))
        rotated = rotate_vectors(omega[None, :] * dt[:, None], f)
        return self.intrinsics.project(rotated)

    def cone(self, x, y, dt, box: SearchBox) -> tuple[np.ndarray, np.ndarray]:
        """Axis (n,3) and half-angle (n,) of each event's reachable-bearing cone."""
        dt = np.atleast_1d(np.asarray(dt, dtype=np.float64))
        f = self.intrinsics.bearings(np.atleast_1d(x), np.atleast_1d(y))
        center = box.center
        axes = rotate_vectors(center[None, :] * dt[:, None], f)
        diag = np.asarray(box.lo) - np.asarray(box.hi)
        half = 0.5 * float(np.linalg.norm(diag)) * np.abs(dt)
        return axes, half

    def cone_bound(self, x: float, y: float, dt: float, box: SearchBox) -> ConeBound:
        axes, half = self.cone([x], [y], [dt], box)
        return ConeBound(axis=axes[0], half_angle=float(half[0]))

    def bbox(self, x, y, dt, box: SearchBox):
        axes, half = self.cone(x, y, dt, box)
        return self.bbox_of_cones(axes, half)

    def bbox_of_cones(self, axes: np.ndarray, half: np.ndarray):
        """Rectangles containing the projected cones; NaN rows where a cone
        reaches the camera plane and cannot be bounded."""
        k = self.intrinsics
        n = axes.shape[0]
        sin_a = np.sin(half)
        cos_a = np.cos(half)
        az = axes[:, 2]
        # lowest z over the cone boundary; positive means the whole cone projects
        z_min = cos_a * az - sin_a * np.sqrt(np.maximum(0.0, 1.0 - az * az))
        ok = z_min > 1e-9

        # orthonormal ring frame per axis; seed axis switched away from near-parallel z
        seed = np.tile(np.array([0.0, 0.0, 1.0]), (n, 1))
        near_z = np.abs(az) > 0.999
        seed[near_z] = np.array([1.0, 0.0, 0.0])
        e1 = np.cross(axes, seed)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(axes, e1)

        phi = 2.0 * math.pi * np.arange(self.n_ring_samples) / self.n_ring_samples
        ring = (cos_a[:, None, None] * axes[:, None, :]
                + sin_a[:, None, None] * (np.cos(phi)[None, :, None] * e1[:, None, :]
                                          + np.sin(phi)[None, :, None] * e2[:, None, :]))
        with np.errstate(all="ignore"):
            px = k.f * ring[:, :, 0] / ring[:, :, 2] + k.u0
            py = k.f * ring[:, :, 1] / ring[:, :, 2] + k.v0
            # between-sample slack: |d(pixel)/d(ring angle)| <= 2 f sin(a) / z_min^2
            pad = (2.0 * k.f * sin_a / (z_min * z_min)) * (math.pi / self.n_ring_samples)
            x_lo = np.min(px, axis=1) - pad
            x_hi = np.max(px, axis=1) + pad
            y_lo = np.min(py, axis=1) - pad
            y_hi = np.max(py, axis=1) + pad

        bad = ~ok
        for arr in (x_lo, x_hi, y_lo, y_hi):
            arr[bad] = np.nan
        return x_lo, x_hi, y_lo, y_hi

    # compiled fast path for the solver's per-branch geometry
    def branch_cache(self, window):
        bearings = np.ascontiguousarray(self.intrinsics.bearings(window.x, window.y))
        phi = 2.0 * math.pi * np.arange(self.n_ring_samples) / self.n_ring_samples
        return (bearings, window.dt, np.cos(phi), np.sin(phi))

    def fill_branch_inputs(self, cache, box, geometry, out):
        from .. import _kernels
        bearings, dt, cos_phi, sin_phi = cache
        k = self.intrinsics
        center = box.center
        half_diag = 0.5 * float(np.linalg.norm(np.asarray(box.lo) - np.asarray(box.hi)))
        _kernels.branch_inputs_rotation(
            bearings, dt, k.f, k.u0, k.v0,
            float(center[0]), float(center[1]), float(center[2]), half_diag,
            cos_phi, sin_phi,
            geometry.margin, geometry.padded_width, geometry.padded_height, *out)
