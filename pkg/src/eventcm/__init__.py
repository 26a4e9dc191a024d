"""Globally optimal contrast maximisation for event cameras.

Estimates motion parameters (optical flow, planar vehicle motion, pure
rotation) by maximising the contrast of the image of warped events with a
branch-and-bound search whose bounds are evaluated recursively, one event at
a time.
"""

from .events import Event, EventStream, EventWindow, downsample, slice_windows
from .geometry import CameraIntrinsics, so3_exp
from .iwe import (AccumulatorImage, ImageGeometry, PixelRect, accumulate,
                  margin_for_box, round_to_accumulator)
from .losses import LOSS_KINDS, BoundState, FocusLoss
from .solver import (Branch, BoundEval, SolverConfig, SolverResult,
                     argmax_in_rect, recursive_bounds, solve, subdivide)
from .warps import (AckermannParams, AckermannWarp, ConeBound, FlowParams,
                    FlowWarp, RigConfig, RotationParams, RotationWarp,
                    SearchBox, WarpModel)

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EventStream",
    "EventWindow",
    "slice_windows",
    "downsample",
    "CameraIntrinsics",
    "so3_exp",
    "AccumulatorImage",
    "ImageGeometry",
    "PixelRect",
    "accumulate",
    "margin_for_box",
    "round_to_accumulator",
    "LOSS_KINDS",
    "FocusLoss",
    "BoundState",
    "SolverConfig",
    "SolverResult",
    "Branch",
    "BoundEval",
    "solve",
    "recursive_bounds",
    "subdivide",
    "argmax_in_rect",
    "SearchBox",
    "WarpModel",
    "FlowParams",
    "FlowWarp",
    "AckermannParams",
    "AckermannWarp",
    "RigConfig",
    "RotationParams",
    "ConeBound",
    "RotationWarp",
]
