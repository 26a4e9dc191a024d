"""Planar vehicle motion seen by a downward-facing camera.

The vehicle follows a circular arc about an instantaneous centre of rotation,
parameterised by yaw rate omega (rad/s) and forward speed v (m/s). The camera
shares the vehicle orientation, sits at a signed forward offset l, and views a
ground plane at constant depth d, so warping an event back to the reference
view is a plane-induced homography. Expanding that homography gives a closed
form in six monotone terms, which is what the per-event bounding boxes build
on.

With F = f/d, A = y - v0 + l*F, B = x - u0 and u = omega*dt:

    x' = -A*sin(u) + B*cos(u) + F*v*g(omega) + u0
    y' =  B*sin(u) + F*v*h(omega) + A*cos(u) - l*F + v0

    g(omega) = (1 - cos(u)) / omega     (odd, increasing;  g(0) = 0)
    h(omega) = sin(u) / omega           (even, peak at 0;  h(0) = dt)

g and h are evaluated by series near zero, so the straight-line limit
(x' = x, y' = y + F*v*dt) falls out of the same expressions and the warp is
continuous across omega = 0.

Only |omega * dt| < pi/2 is admissible: beyond that the trig terms lose the
monotonicity the bounding boxes rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import SearchBox, WarpModel

__all__ = ["AckermannParams", "RigConfig", "AckermannWarp"]

# below this |omega * dt| the series forms of g and h are exact to float64
_SMALL_U = 1e-4


@dataclass(frozen=True)
class AckermannParams:
    """Yaw rate (rad/s) and forward speed (m/s) of the vehicle."""

    omega: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.v])


@dataclass(frozen=True)
class RigConfig:
    """Camera-on-vehicle geometry for the planar model.

    f, u0, v0: pinhole intrinsics in pixels (single focal length).
    l: signed camera offset along the vehicle's forward axis, metres.
    d: depth of the ground plane below the camera, metres.
    """

    f: float
    u0: float
    v0: float
    l: float
    d: float

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be positive")
        if self.d <= 0:
            raise ValueError("plane depth must be positive")

    def k_matrix(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.u0],
                         [0.0, self.f, self.v0],
                         [0.0, 0.0, 1.0]])


def _g_term(omega: float, dt):
    """(1 - cos(omega*dt)) / omega with a series fallback near zero."""
    dt = np.asarray(dt, dtype=np.float64)
    u = omega * dt
    small = np.abs(u) < _SMALL_U
    den = omega if omega != 0.0 else 1.0
    with np.errstate(all="ignore"):
        exact = (1.0 - np.cos(u)) / den
    series = omega * dt * dt * (0.5 - u * u / 24.0)
    return np.where(small, series, exact)


def _h_term(omega: float, dt):
    """sin(omega*dt) / omega with a series fallback near zero."""
    dt = np.asarray(dt, dtype=np.float64)
    u = omega * dt
    small = np.abs(u) < _SMALL_U
    den = omega if omega != 0.0 else 1.0
    with np.errstate(all="ignore"):
        exact = np.sin(u) / den
    series = dt * (1.0 - u * u / 6.0)
    return np.where(small, series, exact)


def _interval_product(a_lo, a_hi, b_lo, b_hi):
    """Elementwise interval multiplication (four-corner min/max)."""
    p1 = a_lo * b_lo
    p2 = a_lo * b_hi
    p3 = a_hi * b_lo
    p4 = a_hi * b_hi
    return (np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)),
            np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)))


class AckermannWarp(WarpModel):

    dim = 2
    name = "ackermann"

    def __init__(self, rig: RigConfig, bbox_method: str = "cases"):
        if bbox_method not in ("cases", "interval"):
            raise ValueError("bbox_method must be 'cases' or 'interval'")
        self.rig = rig
        self.bbox_method = bbox_method

    # -- pose and homography -------------------------------------------------

    def pose(self, dt: float, theta) -> tuple[np.ndarray, np.ndarray]:
        """Rigid transform taking camera coordinates at t_ref+dt to t_ref.

        The vehicle yaws about z by omega*dt and translates along the arc;
        the camera offset l enters the translation through the frame change.
        """
        omega, v = float(theta[0]), float(theta[1])
        u = omega * dt
        s, c = math.sin(u), math.cos(u)
        r_c = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        t_v = np.array([v * float(_g_term(omega, dt)),
                        v * float(_h_term(omega, dt)),
                        0.0])
        t_vc = np.array([0.0, self.rig.l, 0.0])
        t_c = -t_vc + t_v + r_c @ t_vc
        return r_c, t_c

    def homography(self, dt: float, theta) -> np.ndarray:
        """Plane-induced homography to the reference view (ground at depth d)."""
        r_c, t_c = self.pose(dt, theta)
        n = np.array([0.0, 0.0, -1.0])
        k = self.rig.k_matrix()
        m = r_c - np.outer(t_c, n) / self.rig.d
        return k @ m @ np.linalg.inv(k)

    def warp_homography(self, x, y, dt, theta):
        """Warp through the composed homography; the long way around.

        Slower than `warp` but shares no arithmetic with it, which is the
        point: the two paths cross-check each other.
        """
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        dt = np.atleast_1d(np.asarray(dt, dtype=np.float64))
        xo = np.empty_like(x)
        yo = np.empty_like(y)
        for i in range(x.size):
            h = self.homography(float(dt[i]), theta)
            p = h @ np.array([x[i], y[i], 1.0])
            xo[i] = p[0] / p[2]
            yo[i] = p[1] / p[2]
        return xo, yo

    # -- warp ----------------------------------------------------------------

    def warp(self, x, y, dt, theta):
        omega, v = float(theta[0]), float(theta[1])
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        dt = np.asarray(dt, dtype=np.float64)
        rig = self.rig
        fd = rig.f / rig.d
        a = y - rig.v0 + rig.l * fd
        b = x - rig.u0
        u = omega * dt
        s = np.sin(u)
        c = np.cos(u)
        g = _g_term(omega, dt)
        h = _h_term(omega, dt)
        off = -rig.l * fd + rig.v0
        xw = -a * s + b * c + fd * (v * g) + rig.u0
        yw = b * s + fd * (v * h) + a * c + off
        return xw, yw

    # -- bounding boxes ------------------------------------------------------

    def bbox(self, x, y, dt, box: SearchBox):
        """Per-event rectangle containing the warp over the whole box.

        Boxes straddling omega = 0 are split there and the union returned:
        h is not monotone through zero and the sign cases assume one side.
        """
        w_lo, v_lo = box.lo
        w_hi, v_hi = box.hi
        if w_lo < 0.0 < w_hi:
            neg = self._bbox_side(x, y, dt, w_lo, 0.0, v_lo, v_hi)
            pos = self._bbox_side(x, y, dt, 0.0, w_hi, v_lo, v_hi)
            return (np.minimum(neg[0], pos[0]), np.maximum(neg[1], pos[1]),
                    np.minimum(neg[2], pos[2]), np.maximum(neg[3], pos[3]))
        return self._bbox_side(x, y, dt, w_lo, w_hi, v_lo, v_hi)

    def _bbox_side(self, x, y, dt, w_lo, w_hi, v_lo, v_hi):
        if self.bbox_method == "cases":
            return self._bbox_cases(x, y, dt, w_lo, w_hi, v_lo, v_hi)
        return self._bbox_interval(x, y, dt, w_lo, w_hi, v_lo, v_hi)

    def _bbox_cases(self, x, y, dt, w_lo, w_hi, v_lo, v_hi):
        """Sign-case endpoint substitution, one omega/v end per term.

        Seventeen cases in total: the degenerate omega = 0 interval, then for
        each omega sign side the eight combinations of A-sign, B-sign and
        speed direction. Every term of the expanded warp is monotone on a
        single-sign omega interval, so each case just names which end of each
        interval realises the extreme.
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        dt = np.asarray(dt, dtype=np.float64)
        rig = self.rig
        fd = rig.f / rig.d
        a = y - rig.v0 + rig.l * fd
        b = x - rig.u0

        if w_lo == 0.0 and w_hi == 0.0:
            # straight-line case: x is fixed, y slides with speed
            y_span_lo = fd * (v_lo * dt)
            y_span_hi = fd * (v_hi * dt)
            return (x.copy(), x.copy(),
                    y + np.minimum(y_span_lo, y_span_hi),
                    y + np.maximum(y_span_lo, y_span_hi))

        positive_side = w_lo >= 0.0
        if not (positive_side or w_hi <= 0.0):
            raise ValueError("sign-case bounding requires a single-sign omega interval")

        # sin is increasing on the admissible range for either side
        s_lo = np.sin(w_lo * dt)
        s_hi = np.sin(w_hi * dt)
        # cos decreases with |omega|: the inner end of the interval gives the max
        if positive_side:
            c_lo, c_hi = np.cos(w_hi * dt), np.cos(w_lo * dt)
        else:
            c_lo, c_hi = np.cos(w_lo * dt), np.cos(w_hi * dt)
        # g increases through zero; h decreases with |omega|
        g_lo, g_hi = _g_term(w_lo, dt), _g_term(w_hi, dt)
        if positive_side:
            h_lo, h_hi = _h_term(w_hi, dt), _h_term(w_lo, dt)
        else:
            h_lo, h_hi = _h_term(w_lo, dt), _h_term(w_hi, dt)

        a_pos = a >= 0.0
        b_pos = b >= 0.0

        # x' = -A s + B c + F v g + u0
        nas_lo = np.where(a_pos, -a * s_hi, -a * s_lo)
        nas_hi = np.where(a_pos, -a * s_lo, -a * s_hi)
        bc_lo = np.where(b_pos, b * c_lo, b * c_hi)
        bc_hi = np.where(b_pos, b * c_hi, b * c_lo)
        vg_lo = fd * (v_lo * g_lo if v_lo >= 0.0 else v_lo * g_hi)
        vg_hi = fd * (v_hi * g_hi if v_hi >= 0.0 else v_hi * g_lo)
        if not positive_side:
            # g <= 0 here, so the roles of its ends swap in the products
            vg_lo = fd * (v_hi * g_lo if v_hi >= 0.0 else v_hi * g_hi)
            vg_hi = fd * (v_lo * g_hi if v_lo >= 0.0 else v_lo * g_lo)
        x_lo = nas_lo + bc_lo + vg_lo + rig.u0
        x_hi = nas_hi + bc_hi + vg_hi + rig.u0

        # y' = B s + F v h + A c - l F + v0
        bs_lo = np.where(b_pos, b * s_lo, b * s_hi)
        bs_hi = np.where(b_pos, b * s_hi, b * s_lo)
        vh_lo = fd * (v_lo * h_lo if v_lo >= 0.0 else v_lo * h_hi)
        vh_hi = fd * (v_hi * h_hi if v_hi >= 0.0 else v_hi * h_lo)
        ac_lo = np.where(a_pos, a * c_lo, a * c_hi)
        ac_hi = np.where(a_pos, a * c_hi, a * c_lo)
        off = -rig.l * fd + rig.v0
        y_lo = bs_lo + vh_lo + ac_lo + off
        y_hi = bs_hi + vh_hi + ac_hi + off

        return x_lo, x_hi, y_lo, y_hi

    def _bbox_interval(self, x, y, dt, w_lo, w_hi, v_lo, v_hi):
        """Generic interval arithmetic over the same term decomposition.

        No sign dispatch: every factor is enclosed by an interval and products
        take the four-corner extreme. Handles omega intervals through zero on
        its own (cos and h peak there), so it also serves as the fallback when
        the sign cases do not apply.
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        dt = np.asarray(dt, dtype=np.float64)
        rig = self.rig
        fd = rig.f / rig.d
        a = y - rig.v0 + rig.l * fd
        b = x - rig.u0
        straddles = w_lo < 0.0 < w_hi

        s_lo, s_hi = np.sin(w_lo * dt), np.sin(w_hi * dt)
        c_lo = np.minimum(np.cos(w_lo * dt), np.cos(w_hi * dt))
        c_hi = np.ones_like(dt) if straddles else np.maximum(np.cos(w_lo * dt), np.cos(w_hi * dt))
        g_lo, g_hi = _g_term(w_lo, dt), _g_term(w_hi, dt)
        h_ends = (_h_term(w_lo, dt), _h_term(w_hi, dt))
        h_lo = np.minimum(*h_ends)
        h_hi = dt.copy() if straddles else np.maximum(*h_ends)

        na_s_lo, na_s_hi = _interval_product(-a, -a, s_lo, s_hi)
        b_c_lo, b_c_hi = _interval_product(b, b, c_lo, c_hi)
        v_g_lo, v_g_hi = _interval_product(np.full_like(dt, v_lo), np.full_like(dt, v_hi),
                                           g_lo, g_hi)
        x_out_lo = na_s_lo + b_c_lo + fd * v_g_lo + rig.u0
        x_out_hi = na_s_hi + b_c_hi + fd * v_g_hi + rig.u0

        b_s_lo, b_s_hi = _interval_product(b, b, s_lo, s_hi)
        v_h_lo, v_h_hi = _interval_product(np.full_like(dt, v_lo), np.full_like(dt, v_hi),
                                           h_lo, h_hi)
        a_c_lo, a_c_hi = _interval_product(a, a, c_lo, c_hi)
        off = -rig.l * fd + rig.v0
        y_out_lo = b_s_lo + fd * v_h_lo + a_c_lo + off
        y_out_hi = b_s_hi + fd * v_h_hi + a_c_hi + off

        return x_out_lo, x_out_hi, y_out_lo, y_out_hi

    def validate_box(self, box: SearchBox, max_dt: float) -> None:
        super().validate_box(box, max_dt)
        w_max = max(abs(box.lo[0]), abs(box.hi[0]))
        if w_max * max_dt >= math.pi / 2:
            raise ValueError(
                f"|omega|*dt reaches {w_max * max_dt:.3f} >= pi/2; "
                "shrink the omega range or the window")

    # compiled fast path for the solver's per-branch geometry; the rect
    # endpoint logic is the shared one both python variants reduce to
    def branch_cache(self, window):
        rig = self.rig
        fd = rig.f / rig.d
        a = window.y - rig.v0 + rig.l * fd
        b = window.x - rig.u0
        return (a, b, window.dt)

    def fill_branch_inputs(self, cache, box, geometry, out):
        from .. import _kernels
        a, b, dt = cache
        rig = self.rig
        fd = rig.f / rig.d
        _kernels.branch_inputs_ackermann(
            a, b, dt, fd, rig.u0, -rig.l * fd + rig.v0,
            box.lo[0], box.hi[0], box.lo[1], box.hi[1],
            geometry.margin, geometry.padded_width, geometry.padded_height, *out)
