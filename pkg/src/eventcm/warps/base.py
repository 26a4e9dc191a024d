"""Common warp-model interface and the parameter search box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SearchBox", "WarpModel"]


@dataclass(frozen=True)
class SearchBox:
    """Closed axis-aligned box in warp-parameter space."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("lo and hi must have the same dimension")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"inverted interval in search box: {lo} .. {hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def contains(self, theta) -> bool:
        t = np.atleast_1d(theta)
        return bool(np.all(t >= np.asarray(self.lo)) and np.all(t <= np.asarray(self.hi)))

    def sample(self, n: int, rng) -> np.ndarray:
        """n uniform parameter draws, shape (n, dim)."""
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    @staticmethod
    def point(theta) -> "SearchBox":
        t = tuple(np.atleast_1d(theta))
        return SearchBox(t, t)


class WarpModel:
    """A motion model: warp events to the reference view and bound the warp.

    `warp` maps event positions at elapsed time dt to the reference view for a
    single parameter vector; invalid events (model-dependent) come back NaN.
    `bbox` returns, per event, a rectangle guaranteed to contain the warped
    position for every parameter in the box (NaN bounds flag events that
    cannot be bounded, e.g. a rotation cone crossing the camera plane).
    """

    dim: int = 0
    name: str = "warp"

    def warp(self, x, y, dt, theta):
        raise NotImplementedError

    def bbox(self, x, y, dt, box: SearchBox):
        raise NotImplementedError

    def validate_box(self, box: SearchBox, max_dt: float) -> None:
        """Raise if the box is inadmissible for windows up to max_dt long."""
        if box.dim != self.dim:
            raise ValueError(f"{self.name} expects {self.dim}-dimensional boxes, got {box.dim}")
