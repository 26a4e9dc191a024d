"""Error metrics for estimated motion parameters."""

from __future__ import annotations

import numpy as np

__all__ = ["aee", "param_distance", "magnitude_error", "rms_by_dim", "error_metrics"]


def aee(window, warp, theta_gt, theta_est) -> float:
    """Average endpoint error: mean distance between warped event positions
    under the two parameter sets. Events invalid under either warp are
    excluded."""
    xg, yg = warp.warp(window.x, window.y, window.dt, np.asarray(theta_gt, dtype=np.float64))
    xe, ye = warp.warp(window.x, window.y, window.dt, np.asarray(theta_est, dtype=np.float64))
    ok = np.isfinite(xg) & np.isfinite(yg) & np.isfinite(xe) & np.isfinite(ye)
    if not np.any(ok):
        return float("nan")
    return float(np.mean(np.hypot(xg[ok] - xe[ok], yg[ok] - ye[ok])))


def param_distance(theta_gt, theta_est) -> float:
    """Euclidean distance between parameter vectors."""
    return float(np.linalg.norm(np.asarray(theta_gt, dtype=np.float64)
                                - np.asarray(theta_est, dtype=np.float64)))


def magnitude_error(theta_gt, theta_est) -> float:
    """Absolute difference of the parameter-vector norms."""
    return float(abs(np.linalg.norm(np.asarray(theta_gt, dtype=np.float64))
                     - np.linalg.norm(np.asarray(theta_est, dtype=np.float64))))


def rms_by_dim(theta_gt_seq, theta_est_seq) -> np.ndarray:
    """Per-dimension RMS error over a sequence of windows."""
    gt = np.atleast_2d(np.asarray(theta_gt_seq, dtype=np.float64))
    est = np.atleast_2d(np.asarray(theta_est_seq, dtype=np.float64))
    if gt.shape != est.shape:
        raise ValueError(f"shape mismatch: {gt.shape} vs {est.shape}")
    return np.sqrt(np.mean((gt - est) ** 2, axis=0))


def error_metrics(theta_gt, theta_est, window=None, warp=None) -> dict:
    """Bundle of scalar errors; includes AEE when events and a warp are given."""
    out = {
        "epsilon": param_distance(theta_gt, theta_est),
        "phi": magnitude_error(theta_gt, theta_est),
    }
    if window is not None and warp is not None:
        out["aee"] = aee(window, warp, theta_gt, theta_est)
    return out
