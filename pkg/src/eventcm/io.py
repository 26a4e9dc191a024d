"""File formats: event text streams, calibration, IWE images, run reports.

Event files are whitespace-separated "t x y p" lines: t in seconds, x and y
in pixels (integers in camera dumps, but any decimal is accepted so that
synthetic streams round-trip losslessly), p in {0, 1} mapping to -1/+1.
Calibration files are flat key=value text. Reports are JSON lines, one object
per processed window; bound traces are CSV. IWE images are binary PGM.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .events import EventStream, EventWindow
from .iwe import AccumulatorImage

__all__ = [
    "read_events",
    "write_events",
    "CalibrationFile",
    "read_calibration",
    "write_calibration",
    "undistort",
    "distort_points",
    "write_iwe_image",
    "RunRecord",
    "write_report",
    "read_report",
    "write_trace_csv",
]


def read_events(path) -> EventStream:
    """Parse a "t x y p" event file; '#' comments and blank lines are skipped."""
    ts, xs, ys, ps = [], [], [], []
    last_t = None
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 't x y p', got {stripped!r}")
            try:
                t = float(parts[0])
                x = float(parts[1])
                y = float(parts[2])
                p = int(parts[3])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed event line: {exc}") from None
            if p not in (0, 1):
                raise ValueError(f"{path}:{lineno}: polarity must be 0 or 1, got {p}")
            if last_t is not None and t < last_t:
                raise ValueError(f"{path}:{lineno}: timestamp regression ({t} after {last_t})")
            last_t = t
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(1 if p == 1 else -1)
    return EventStream(np.array(xs), np.array(ys), np.array(ts),
                       np.array(ps, dtype=np.int8))


def write_events(events, path) -> None:
    """Write "t x y p" lines. repr() keeps every float bit, so a read-back
    reproduces the stream exactly."""
    with open(path, "w") as fh:
        for t, x, y, p in zip(events.t, events.x, events.y, events.polarity):
            fh.write(f"{float(t)!r} {float(x)!r} {float(y)!r} {1 if p > 0 else 0}\n")


@dataclass(frozen=True)
class CalibrationFile:
    """Pinhole intrinsics with radial-tangential distortion, plus the optional
    planar-rig parameters (camera offset l and plane depth d)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0
    l: float = None
    d: float = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("sensor size must be positive")

    @property
    def has_rig(self) -> bool:
        return self.l is not None and self.d is not None

    @property
    def has_distortion(self) -> bool:
        return any(v != 0.0 for v in (self.k1, self.k2, self.p1, self.p2, self.k3))


_CALIB_FLOAT_KEYS = ("fx", "fy", "cx", "cy", "k1", "k2", "p1", "p2", "k3", "l", "d")
_CALIB_INT_KEYS = ("width", "height")


def read_calibration(path) -> CalibrationFile:
    values = {}
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, val = stripped.partition("=")
            key = key.strip()
            val = val.strip()
            if key in _CALIB_INT_KEYS:
                values[key] = int(val)
            elif key in _CALIB_FLOAT_KEYS:
                values[key] = float(val)
            else:
                raise ValueError(f"{path}:{lineno}: unknown calibration key {key!r}")
    missing = [k for k in ("fx", "fy", "cx", "cy", "width", "height") if k not in values]
    if missing:
        raise ValueError(f"{path}: missing calibration keys: {missing}")
    return CalibrationFile(**values)


def write_calibration(calib: CalibrationFile, path) -> None:
    with open(path, "w") as fh:
        for key, value in asdict(calib).items():
            if value is None:
                continue
            fh.write(f"{key}={value!r}\n")


def distort_points(xn, yn, calib: CalibrationFile):
    """Forward radial-tangential model on normalised coordinates."""
    r2 = xn * xn + yn * yn
    radial = 1.0 + calib.k1 * r2 + calib.k2 * r2 * r2 + calib.k3 * r2 * r2 * r2
    xd = xn * radial + 2.0 * calib.p1 * xn * yn + calib.p2 * (r2 + 2.0 * xn * xn)
    yd = yn * radial + calib.p1 * (r2 + 2.0 * yn * yn) + 2.0 * calib.p2 * xn * yn
    return xd, yd


def undistort(events, calib: CalibrationFile, max_iter: int = 8,
              tol_px: float = 1e-10, drop_tol_px: float = 1e-6):
    """Move events to undistorted pinhole coordinates with focal fx.

    Inverts the distortion by fixed-point iteration on normalised
    coordinates (up to max_iter sweeps, early exit once steps fall under
    tol_px); a pixel whose inverse fails to reproduce the observed position
    through the forward model within drop_tol_px is dropped. Output pixels
    use the single focal length fx for both axes (anisotropy is resolved
    here, at ingestion) and keep the original principal point.

    Returns (stream_or_window, n_dropped).
    """
    xd = (events.x - calib.cx) / calib.fx
    yd = (events.y - calib.cy) / calib.fy
    xu = xd.copy()
    yu = yd.copy()
    tol = tol_px / calib.fx
    for _ in range(max_iter):
        r2 = xu * xu + yu * yu
        radial = 1.0 + calib.k1 * r2 + calib.k2 * r2 * r2 + calib.k3 * r2 * r2 * r2
        dx = 2.0 * calib.p1 * xu * yu + calib.p2 * (r2 + 2.0 * xu * xu)
        dy = calib.p1 * (r2 + 2.0 * yu * yu) + 2.0 * calib.p2 * xu * yu
        with np.errstate(all="ignore"):
            xn = (xd - dx) / radial
            yn = (yd - dy) / radial
        step = np.hypot(xn - xu, yn - yu)
        xu, yu = xn, yn
        if np.all(step < tol):
            break
    # a usable inverse must reproduce the observation through the forward model
    with np.errstate(all="ignore"):
        xc, yc = distort_points(xu, yu, calib)
    ok = (np.hypot(xc - xd, yc - yd) * calib.fx < drop_tol_px)
    ok &= np.isfinite(xu) & np.isfinite(yu)

    x_out = calib.fx * xu + calib.cx
    y_out = calib.fx * yu + calib.cy
    n_dropped = int(np.count_nonzero(~ok))
    if isinstance(events, EventWindow):
        out = EventWindow(x_out[ok], y_out[ok], events.t[ok], events.polarity[ok],
                          t_ref=events.t_ref, duration=events.duration)
    else:
        out = EventStream(x_out[ok], y_out[ok], events.t[ok], events.polarity[ok])
    return out, n_dropped


def write_iwe_image(iwe: AccumulatorImage, path) -> None:
    """8-bit binary PGM of the sensor-visible IWE region.

    Counts scale linearly: 0 stays 0 and the maximum count maps to 255
    (round-half-up in exact integer arithmetic, so output bytes are
    deterministic). An all-zero image stays all zero.
    """
    core = iwe.core()
    peak = int(core.max()) if core.size else 0
    if peak == 0:
        data = np.zeros(core.shape, dtype=np.uint8)
    else:
        data = ((core * 510 + peak) // (2 * peak)).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


@dataclass
class RunRecord:
    """One processed window: estimate, solver diagnostics, re-run config."""

    t_ref: float
    theta: list
    objective: float
    gap: float
    iterations: int
    converged: bool
    n_events: int
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    wall_time: float = None

    def to_json(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(payload, sort_keys=True)


def write_report(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_report(path) -> list[dict]:
    out = []
    with open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_trace_csv(trace, path) -> None:
    """Bound evolution rows: iteration, upper, best_lower."""
    with open(path, "w") as fh:
        fh.write("iteration,upper,best_lower\n")
        for it, upper, lower in trace:
            fh.write(f"{int(it)},{float(upper)!r},{float(lower)!r}\n")
