"""Contrast objectives over the IWE and their per-event bound increments.

Six objectives are supported:

    sos     sum of squared counts
    var     per-pixel variance around the fixed mean count
    soe     sum of exponentials of counts
    sosa    sum of suppressed accumulations, exp(-delta * count)
    soeas   w1 * soe + w2 * sos
    sosaas  w1 * sosa + w2 * sos

Each objective admits an exact per-event increment f(count+1) - f(count),
which is what makes the solver's recursive bound evaluation possible: the
lower bound telescopes to the full-image objective at the box centre, and the
upper bound replaces the landing count with the running maximum over the
event's reachable accumulators.

The mean count mu = N / N_p is frozen per (window, geometry) pair before
solving and treated as a constant of the variance objective; N is the event
count after any downsampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .iwe import AccumulatorImage, ImageGeometry

__all__ = ["LOSS_KINDS", "FocusLoss", "BoundState"]

LOSS_KINDS = ("sos", "var", "soe", "sosa", "soeas", "sosaas")

# integer codes shared with the compiled kernels
LOSS_CODES = {k: i for i, k in enumerate(LOSS_KINDS)}

_E_MINUS_1 = math.e - 1.0

# exp of a count beyond this overflows float64; fail loudly rather than saturate
MAX_EXP_COUNT = 700


@dataclass(frozen=True)
class FocusLoss:
    """One contrast objective bound to a grid size and event count."""

    kind: str
    n_p: int
    mu: float = 0.0
    delta: float = 1.0
    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.n_p <= 0:
            raise ValueError("n_p must be positive")
        if self.kind in ("sosa", "sosaas") and self.delta <= 0:
            raise ValueError("shift factor delta must be positive")
        if self.kind in ("soeas", "sosaas"):
            if self.w1 < 0 or self.w2 < 0 or (self.w1 == 0 and self.w2 == 0):
                raise ValueError("weights must be non-negative and not both zero")

    @staticmethod
    def bind(kind: str, geometry: ImageGeometry, n_events: int,
             delta: float = 1.0, w1: float = 1.0, w2: float = 1.0) -> "FocusLoss":
        """Bind a loss kind to a grid, fixing N_p and the mean count."""
        n_p = geometry.n_accumulators
        return FocusLoss(kind=kind, n_p=n_p, mu=n_events / n_p,
                         delta=delta, w1=w1, w2=w2)

    @property
    def code(self) -> int:
        return LOSS_CODES[self.kind]

    def initial_value(self) -> float:
        """Objective of the all-zero image (the recursion's starting value)."""
        if self.kind == "sos":
            return 0.0
        if self.kind == "var":
            return self.mu * self.mu
        if self.kind in ("soe", "sosa"):
            return float(self.n_p)
        # hybrids: w1 * (all-zero exponential sum) + w2 * 0
        return self.w1 * float(self.n_p)

    def evaluate(self, iwe) -> float:
        """Full-image objective. Accepts an AccumulatorImage or a count array.

        Real-valued grids (smoothed IWEs) are accepted too; the formulas are
        identical.
        """
        if isinstance(iwe, AccumulatorImage):
            if iwe.n_p != self.n_p:
                raise ValueError(f"loss bound to n_p={self.n_p} but image has n_p={iwe.n_p}")
            counts = iwe.counts
        else:
            counts = np.asarray(iwe)
            if counts.size != self.n_p:
                raise ValueError(f"loss bound to n_p={self.n_p} but grid has {counts.size} cells")
        c = counts.astype(np.float64, copy=False)
        if self.kind in ("soe", "soeas") and c.size and c.max() > MAX_EXP_COUNT:
            raise OverflowError(f"count {c.max()} too large for exponential objective")
        if self.kind == "sos":
            return float(np.sum(c * c))
        if self.kind == "var":
            d = c - self.mu
            return float(np.sum(d * d) / self.n_p)
        if self.kind == "soe":
            return float(np.sum(np.exp(c)))
        if self.kind == "sosa":
            return float(np.sum(np.exp(-self.delta * c)))
        sq = float(np.sum(c * c))
        if self.kind == "soeas":
            return self.w1 * float(np.sum(np.exp(c))) + self.w2 * sq
        return self.w1 * float(np.sum(np.exp(-self.delta * c))) + self.w2 * sq

    def tau_scale(self) -> float:
        """Factor carrying one termination-gap budget across loss scales.

        var is an affine image of sos with slope 1/N_p, so the factor is
        exact there: the two searches make identical decisions under it. The
        exponential kinds only get an order-of-magnitude match via their
        empty-cell increment.
        """
        if self.kind == "sos":
            return 1.0
        if self.kind == "var":
            return 1.0 / self.n_p
        if self.kind == "soe":
            return _E_MINUS_1
        if self.kind == "sosa":
            return 1.0 - math.exp(-self.delta)
        if self.kind == "soeas":
            return self.w1 * _E_MINUS_1 + self.w2
        return self.w1 * (1.0 - math.exp(-self.delta)) + self.w2

    def lower_increment(self, count: int) -> float:
        """Objective change when an event lands on a cell currently at `count`."""
        return self._increment(count)

    def upper_increment(self, q: int) -> float:
        """Bound increment with the landing count replaced by the box maximum q."""
        return self._increment(q)

    def _increment(self, i) -> float:
        if i < 0:
            raise ValueError("accumulator count cannot be negative")
        if self.kind == "sos":
            return 1.0 + 2.0 * i
        if self.kind == "var":
            return (1.0 - 2.0 * self.mu + 2.0 * i) / self.n_p
        if self.kind == "soe":
            if i > MAX_EXP_COUNT:
                raise OverflowError(f"count {i} too large for exponential objective")
            return _E_MINUS_1 * math.exp(i)
        if self.kind == "sosa":
            return (math.exp(-self.delta) - 1.0) * math.exp(-self.delta * i)
        if self.kind == "soeas":
            if i > MAX_EXP_COUNT:
                raise OverflowError(f"count {i} too large for exponential objective")
            return self.w1 * _E_MINUS_1 * math.exp(i) + self.w2 * (1.0 + 2.0 * i)
        return (self.w1 * (math.exp(-self.delta) - 1.0) * math.exp(-self.delta * i)
                + self.w2 * (1.0 + 2.0 * i))


@dataclass
class BoundState:
    """Running lower/upper bound pair after k events of the recursion."""

    lower: float
    upper: float
    k: int = 0

    @staticmethod
    def initial(loss: FocusLoss) -> "BoundState":
        v = loss.initial_value()
        return BoundState(lower=v, upper=v, k=0)

    def advance(self, loss: FocusLoss, count_at_eta: int, q: int) -> "BoundState":
        return BoundState(lower=self.lower + loss.lower_increment(count_at_eta),
                          upper=self.upper + loss.upper_increment(q),
                          k=self.k + 1)
