"""Event streams and time windows.

Events are kept as parallel numpy arrays (struct-of-arrays) because every
downstream operation is vectorised over the whole window. A single event is
only ever materialised at I/O boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Event", "EventStream", "EventWindow", "slice_windows", "downsample"]


@dataclass(frozen=True)
class Event:
    """One sensor activation: sub-pixel position, timestamp, polarity sign."""

    x: float
    y: float
    t: float
    polarity: int = 1

    def __post_init__(self):
        if self.polarity not in (-1, 1):
            raise ValueError(f"polarity must be +1 or -1, got {self.polarity}")


def _as_f64(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64))


@dataclass(frozen=True)
class EventStream:
    """A time-ordered event sequence with no window semantics attached."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    polarity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_f64(self.x))
        object.__setattr__(self, "y", _as_f64(self.y))
        object.__setattr__(self, "t", _as_f64(self.t))
        object.__setattr__(self, "polarity",
                           np.ascontiguousarray(np.asarray(self.polarity, dtype=np.int8)))
        n = self.t.size
        if not (self.x.size == self.y.size == self.polarity.size == n):
            raise ValueError("event arrays must have equal length")
        if n:
            if not np.all(np.isfinite(self.t)):
                raise ValueError("timestamps must be finite")
            if np.any(np.diff(self.t) < 0):
                raise ValueError("events must be sorted by non-decreasing timestamp")
            if not np.all(np.isin(self.polarity, (-1, 1))):
                raise ValueError("polarity values must be +1 or -1")

    def __len__(self) -> int:
        return self.t.size

    @staticmethod
    def empty() -> "EventStream":
        z = np.zeros(0)
        return EventStream(z, z, z, np.zeros(0, dtype=np.int8))


@dataclass(frozen=True)
class EventWindow:
    """Events inside the half-open interval [t_ref, t_ref + duration).

    The ordering invariant (non-decreasing t) is what allows the solver to
    process events recursively; it is checked at construction.
    """

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    polarity: np.ndarray
    t_ref: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", _as_f64(self.x))
        object.__setattr__(self, "y", _as_f64(self.y))
        object.__setattr__(self, "t", _as_f64(self.t))
        object.__setattr__(self, "polarity",
                           np.ascontiguousarray(np.asarray(self.polarity, dtype=np.int8)))
        n = self.t.size
        if not (self.x.size == self.y.size == self.polarity.size == n):
            raise ValueError("event arrays must have equal length")
        if n:
            if np.any(np.diff(self.t) < 0):
                raise ValueError("events must be sorted by non-decreasing timestamp")
            # small slack: duration endpoints are produced by float arithmetic
            if self.t[0] < self.t_ref - 1e-12 or self.t[-1] > self.t_ref + self.duration + 1e-12:
                raise ValueError("event timestamps must lie within [t_ref, t_ref + duration]")

    def __len__(self) -> int:
        return self.t.size

    @property
    def dt(self) -> np.ndarray:
        """Elapsed time of each event since the reference timestamp."""
        return self.t - self.t_ref

    @staticmethod
    def empty(t_ref: float = 0.0, duration: float = 0.0) -> "EventWindow":
        z = np.zeros(0)
        return EventWindow(z, z, z, np.zeros(0, dtype=np.int8), t_ref, duration)


def slice_windows(stream: EventStream, window_len: float) -> list[EventWindow]:
    """Partition a stream into consecutive half-open windows of fixed length.

    Window i covers [start + i*window_len, start + (i+1)*window_len) where
    start is the first event's timestamp. Every event lands in exactly one
    window; windows with no events are still emitted so that indices map
    linearly to time.
    """
    if window_len <= 0:
        raise ValueError("window_len must be positive")
    if len(stream) == 0:
        return []
    start = float(stream.t[0])
    span = float(stream.t[-1]) - start
    n_windows = int(np.floor(span / window_len)) + 1
    # half-open windows: a last event sitting on (or past, by rounding) the
    # final edge needs one more window
    while start + n_windows * window_len <= stream.t[-1]:
        n_windows += 1
    edges = start + window_len * np.arange(n_windows + 1)
    # half-open windows: event at an edge belongs to the right window
    idx = np.searchsorted(stream.t, edges, side="left")
    out = []
    for i in range(n_windows):
        lo, hi = idx[i], idx[i + 1]
        out.append(EventWindow(stream.x[lo:hi], stream.y[lo:hi], stream.t[lo:hi],
                               stream.polarity[lo:hi],
                               t_ref=float(edges[i]), duration=window_len))
    return out


def downsample(window: EventWindow, m: int) -> EventWindow:
    """Keep every m-th event (indices 0, m, 2m, ...) in temporal order."""
    if m < 1:
        raise ValueError("downsampling factor must be >= 1")
    if m == 1:
        return window
    sl = slice(None, None, m)
    return EventWindow(window.x[sl], window.y[sl], window.t[sl], window.polarity[sl],
                       t_ref=window.t_ref, duration=window.duration)
