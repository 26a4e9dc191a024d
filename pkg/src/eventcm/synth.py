"""Synthetic scenes and event streams with known motion.

A scene is a set of axis-aligned line segments on a plane at fixed depth.
Events are produced by picking a random point on a random segment, a random
timestamp in the window, and projecting the point through the camera pose at
that timestamp. By construction, warping an event back with the true motion
parameters reproduces the point's reference-view projection exactly, so the
contrast objective peaks near (not necessarily at: the objective has its own
bias) the generating parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import EventWindow
from .geometry import CameraIntrinsics, rotate_vectors
from .warps.ackermann import AckermannWarp, _g_term, _h_term
from .warps.flow import FlowWarp
from .warps.rotation import RotationWarp

__all__ = ["LineScene", "NoiseSpec", "gen_scene", "gen_events", "add_noise"]


@dataclass(frozen=True)
class LineScene:
    """Axis-aligned 3D segments on the plane z = depth; shape (n, 2, 3)."""

    segments: np.ndarray
    depth: float

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=np.float64)
        if seg.ndim != 3 or seg.shape[1:] != (2, 3):
            raise ValueError("segments must have shape (n, 2, 3)")
        if self.depth <= 0:
            raise ValueError("depth must be positive")
        if seg.size and not np.allclose(seg[:, :, 2], self.depth):
            raise ValueError("all segment endpoints must lie on the plane z = depth")
        object.__setattr__(self, "segments", seg)


@dataclass(frozen=True)
class NoiseSpec:
    """Spurious-event injection: noise count = floor(ne_ratio * N)."""

    ne_ratio: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ne_ratio <= 0.4:
            raise ValueError("ne_ratio must lie in [0, 0.4]")


def gen_scene(n_segments: int, extent, depth: float, seed: int) -> LineScene:
    """Random horizontal and vertical segments inside a rectangle on the plane.

    `extent` is the half-size of the rectangle in metres (scalar or (x, y)).
    Deterministic for a fixed seed.
    """
    if n_segments < 1:
        raise ValueError("need at least one segment")
    ext = np.broadcast_to(np.asarray(extent, dtype=np.float64), (2,))
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-ext, ext, size=(n_segments, 2))
    horizontal = rng.random(n_segments) < 0.5
    scale = float(min(ext[0], ext[1]))
    lengths = rng.uniform(0.2, 1.0, size=n_segments) * max(scale, 1e-9)
    segs = np.empty((n_segments, 2, 3))
    segs[:, :, 2] = depth
    half = 0.5 * lengths
    segs[:, 0, 0] = centers[:, 0] - np.where(horizontal, half, 0.0)
    segs[:, 1, 0] = centers[:, 0] + np.where(horizontal, half, 0.0)
    segs[:, 0, 1] = centers[:, 1] - np.where(horizontal, 0.0, half)
    segs[:, 1, 1] = centers[:, 1] + np.where(horizontal, 0.0, half)
    return LineScene(segments=segs, depth=depth)


def _pixels_at_time(points: np.ndarray, t: np.ndarray, warp, theta) -> tuple:
    """Project scene points through the camera pose at each timestamp.

    Inverts the warp model: warping the returned pixel back with `theta`
    lands on the point's reference-view projection.
    """
    if isinstance(warp, AckermannWarp):
        rig = warp.rig
        omega, v = float(theta[0]), float(theta[1])
        u = omega * t
        s, c = np.sin(u), np.cos(u)
        g = _g_term(omega, t)
        h = _h_term(omega, t)
        tcx = v * g - rig.l * s
        tcy = v * h + rig.l * c - rig.l
        dx = points[:, 0] - tcx
        dy = points[:, 1] - tcy
        # R^T for a z-rotation by u
        xc = c * dx + s * dy
        yc = -s * dx + c * dy
        z = points[:, 2]
        return rig.f * xc / z + rig.u0, rig.f * yc / z + rig.v0
    if isinstance(warp, RotationWarp):
        k = warp.intrinsics
        f_ref = points / np.linalg.norm(points, axis=1, keepdims=True)
        omega = np.asarray(theta, dtype=np.float64)
        f_t = rotate_vectors(-omega[None, :] * t[:, None], f_ref)
        return k.project(f_t)
    if isinstance(warp, FlowWarp):
        # flow is image-space: points enter via a static pinhole at unit-ish depth
        k = getattr(warp, "intrinsics", None)
        if k is None:
            raise ValueError("flow generation needs warp.intrinsics set")
        x0, y0 = k.project(points)
        return x0 - float(theta[0]) * t, y0 - float(theta[1]) * t
    raise TypeError(f"no generator for warp model {type(warp).__name__}")


def gen_events(scene: LineScene, warp, theta_gt, duration: float, n_events: int,
               sensor_size, seed: int, t_ref: float = 0.0,
               max_tries: int = 60) -> EventWindow:
    """Sample `n_events` events of the moving camera observing the scene.

    Points that project off-sensor at their sampled time are re-drawn
    (bounded retries). Events come back time-sorted with random polarity.
    """
    if n_events < 1:
        raise ValueError("need at least one event")
    width, height = sensor_size
    rng = np.random.default_rng(seed)
    theta = np.asarray(theta_gt, dtype=np.float64)

    xs = np.empty(0)
    ys = np.empty(0)
    ts = np.empty(0)
    need = n_events
    for _ in range(max_tries):
        m = max(need, 16)
        seg = rng.integers(0, scene.segments.shape[0], size=m)
        frac = rng.uniform(0.0, 1.0, size=m)
        pts = (scene.segments[seg, 0] * (1.0 - frac[:, None])
               + scene.segments[seg, 1] * frac[:, None])
        t = rng.uniform(0.0, duration, size=m)
        px, py = _pixels_at_time(pts, t, warp, theta)
        ok = (np.isfinite(px) & np.isfinite(py)
              & (px >= 0) & (px <= width - 1) & (py >= 0) & (py <= height - 1))
        xs = np.concatenate([xs, px[ok]])
        ys = np.concatenate([ys, py[ok]])
        ts = np.concatenate([ts, t[ok]])
        need = n_events - xs.size
        if need <= 0:
            break
    if xs.size < n_events:
        raise RuntimeError(
            f"could only place {xs.size}/{n_events} events on the sensor; "
            "scene and motion are mismatched for this camera")
    xs, ys, ts = xs[:n_events], ys[:n_events], ts[:n_events]
    order = np.argsort(ts, kind="stable")
    pol = rng.integers(0, 2, size=n_events).astype(np.int8) * 2 - 1
    return EventWindow(xs[order], ys[order], t_ref + ts[order], pol[order],
                       t_ref=t_ref, duration=duration)


def add_noise(window: EventWindow, spec: NoiseSpec, sensor_size) -> EventWindow:
    """Insert uniformly scattered spurious events and re-sort by time."""
    n_noise = int(math.floor(spec.ne_ratio * len(window)))
    if n_noise == 0:
        return window
    width, height = sensor_size
    rng = np.random.default_rng(spec.seed)
    nx = rng.uniform(0.0, width - 1.0, size=n_noise)
    ny = rng.uniform(0.0, height - 1.0, size=n_noise)
    nt = rng.uniform(window.t_ref, window.t_ref + window.duration, size=n_noise)
    npol = rng.integers(0, 2, size=n_noise).astype(np.int8) * 2 - 1
    x = np.concatenate([window.x, nx])
    y = np.concatenate([window.y, ny])
    t = np.concatenate([window.t, nt])
    pol = np.concatenate([window.polarity, npol])
    order = np.argsort(t, kind="stable")
    return EventWindow(x[order], y[order], t[order], pol[order],
                       t_ref=window.t_ref, duration=window.duration)
