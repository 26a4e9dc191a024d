from .base import SearchBox, WarpModel
from .flow import FlowParams, FlowWarp
from .ackermann import AckermannParams, AckermannWarp, RigConfig
from .rotation import ConeBound, RotationParams, RotationWarp

__all__ = [
    "SearchBox",
    "WarpModel",
    "FlowParams",
    "FlowWarp",
    "AckermannParams",
    "AckermannWarp",
    "RigConfig",
    "ConeBound",
    "RotationParams",
    "RotationWarp",
]
