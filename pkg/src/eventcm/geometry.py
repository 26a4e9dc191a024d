"""Rotation and pinhole-camera primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CameraIntrinsics", "skew", "so3_exp", "rotate_vectors"]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model with a single focal length and zero skew."""

    f: float
    u0: float
    v0: float

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be positive")

    def matrix(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.u0],
                         [0.0, self.f, self.v0],
                         [0.0, 0.0, 1.0]])

    def bearings(self, x, y) -> np.ndarray:
        """Unit bearing vectors for pixel coordinates; shape (..., 3)."""
        x = np.asarray(x, dtype=np.float64)
        b = np.stack([(x - self.u0) / self.f,
                      (np.asarray(y, dtype=np.float64) - self.v0) / self.f,
                      np.ones_like(x)], axis=-1)
        return b / np.linalg.norm(b, axis=-1, keepdims=True)

    def project(self, v):
        """Pixel coordinates of camera-frame points with positive z.

        Returns (x, y); rows with non-positive z come back as NaN.
        """
        v = np.asarray(v, dtype=np.float64)
        z = v[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(z > 0, self.f * v[..., 0] / z + self.u0, np.nan)
            y = np.where(z > 0, self.f * v[..., 1] / z + self.v0, np.nan)
        return x, y


def skew(w) -> np.ndarray:
    """3x3 cross-product matrix of a 3-vector."""
    w = np.asarray(w, dtype=np.float64)
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def so3_exp(w) -> np.ndarray:
    """Rodrigues formula: rotation matrix for a rotation vector."""
    w = np.asarray(w, dtype=np.float64)
    theta = float(np.linalg.norm(w))
    if theta < 1e-12:
        # second-order series keeps orthonormality to machine precision here
        k = skew(w)
        return np.eye(3) + k + 0.5 * (k @ k)
    k = skew(w / theta)
    return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)


def rotate_vectors(w, vecs) -> np.ndarray:
    """Apply per-row rotation vectors to per-row 3-vectors (Rodrigues, vectorised).

    `w` has shape (n, 3), `vecs` shape (n, 3). Equivalent to stacking
    so3_exp(w[i]) @ vecs[i] without forming matrices.
    """
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(vecs, dtype=np.float64)
    theta = np.linalg.norm(w, axis=-1, keepdims=True)
    small = theta[..., 0] < 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        axis = np.where(theta > 0, w / theta, 0.0)
    c = np.cos(theta)
    s = np.sin(theta)
    out = (v * c
           + np.cross(axis, v) * s
           + axis * np.sum(axis * v, axis=-1, keepdims=True) * (1.0 - c))
    if np.any(small):
        out[small] = v[small] + np.cross(w[small], v[small])
    return out
