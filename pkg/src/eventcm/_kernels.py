"""Compiled inner loops.

Everything here is deliberately dumb and array-in/array-out: model geometry
and loss bookkeeping stay in the Python layer, these kernels only run the
per-event recursions and the brute-force objective enumerations that would be
too slow in numpy. All kernels release the GIL so branch evaluations can run
in worker threads.

Loss kinds are passed as integer codes in the order of losses.LOSS_KINDS.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_E_MINUS_1 = math.e - 1.0
_MAX_EXP = 700.0


@njit(cache=True, nogil=True, inline="always")
def _round_i(v):
    # half away from zero, matching iwe.round_to_accumulator
    if v >= 0.0:
        return np.int64(v + 0.5)
    return np.int64(v - 0.5)


@njit(cache=True, nogil=True, inline="always")
def _increment(kind, i, delta, w1, w2, n_p, mu):
    """Objective change for one event landing on a cell with count i."""
    if kind == 0:  # sos
        return 1.0 + 2.0 * i
    if kind == 1:  # var
        return (1.0 - 2.0 * mu + 2.0 * i) / n_p
    if kind == 2:  # soe
        if i > _MAX_EXP:
            raise OverflowError("accumulator count too large for exponential objective")
        return _E_MINUS_1 * math.exp(i)
    if kind == 3:  # sosa
        return (math.exp(-delta) - 1.0) * math.exp(-delta * i)
    if kind == 4:  # soeas
        if i > _MAX_EXP:
            raise OverflowError("accumulator count too large for exponential objective")
        return w1 * _E_MINUS_1 * math.exp(i) + w2 * (1.0 + 2.0 * i)
    # sosaas
    return (w1 * (math.exp(-delta) - 1.0) * math.exp(-delta * i)
            + w2 * (1.0 + 2.0 * i))


@njit(cache=True, nogil=True, inline="always")
def _cell_value(kind, c, delta, w1, w2, n_p, mu):
    """Per-cell objective contribution of a count c."""
    if kind == 0:
        return float(c) * float(c)
    if kind == 1:
        d = float(c) - mu
        return d * d / n_p
    if kind == 2:
        if c > _MAX_EXP:
            raise OverflowError("accumulator count too large for exponential objective")
        return math.exp(float(c))
    if kind == 3:
        return math.exp(-delta * float(c))
    if kind == 4:
        if c > _MAX_EXP:
            raise OverflowError("accumulator count too large for exponential objective")
        return w1 * math.exp(float(c)) + w2 * float(c) * float(c)
    return w1 * math.exp(-delta * float(c)) + w2 * float(c) * float(c)


@njit(cache=True, nogil=True)
def bound_recursion(eta_x, eta_y, valid_lo,
                    box_x0, box_x1, box_y0, box_y1, valid_bb,
                    up_img, lo_img,
                    kind, delta, w1, w2, n_p, mu):
    """One pass of the recursive bound evaluation over a sorted event window.

    Inputs are padded-grid integer indices: eta_* is where the box-centre warp
    of each event rounds to; box_* are inclusive accumulator index ranges
    reachable over the parameter box.

    The upper-bound image is maintained as a pointwise envelope: each event
    raises every accumulator it can reach, so up_img + n_invalid dominates
    the true IWE of every parameter in the box, cell for cell. Raising only
    the maximal reachable accumulator (tighter, one write per event) is NOT
    sound once events that share an accumulator stop sharing an exact
    sub-pixel position: their reachable ranges need not nest and a later
    narrow range can miss the earlier increment. Most ranges collapse to a
    single cell as boxes shrink, where both schemes coincide and the bounds
    converge.

    Events with valid_bb == 0 cannot be bounded (e.g. rotation cone crossing
    the camera plane); they may land anywhere or drop off-grid, so they add
    a global +1 to the envelope and their worst admissible increment to the
    upper bound. Events with valid_lo == 0 are invalid at the box centre and
    add nothing to the lower bound.

    Returns (lower_sum, upper_sum, n_invalid); the caller adds the loss's
    initial value to both sums. up_img and lo_img are scratch images that
    must arrive zeroed; they are returned to all-zero before the kernel
    exits, so callers may reuse them across evaluations.
    """
    lower = 0.0
    upper = 0.0
    n_invalid = np.int64(0)
    n_unbounded = np.int64(0)  # global envelope offset for unbounded events
    gmax = np.int64(0)
    n = eta_x.shape[0]
    for k in range(n):
        if valid_bb[k]:
            x0 = box_x0[k]
            x1 = box_x1[k]
            y0 = box_y0[k]
            y1 = box_y1[k]
            q = np.int64(0)
            for iy in range(y0, y1 + 1):
                for ix in range(x0, x1 + 1):
                    c = up_img[iy, ix]
                    if c > q:
                        q = c
            q += n_unbounded
            upper += _increment(kind, float(q), delta, w1, w2, n_p, mu)
            for iy in range(y0, y1 + 1):
                for ix in range(x0, x1 + 1):
                    nc = up_img[iy, ix] + 1
                    up_img[iy, ix] = nc
                    if nc > gmax:
                        gmax = nc
        else:
            # may land on the best accumulator anywhere, or miss the grid
            # entirely, whichever inflates the bound more
            inc = _increment(kind, float(gmax + n_unbounded), delta, w1, w2, n_p, mu)
            if inc > 0.0:
                upper += inc
            n_unbounded += 1
        if valid_lo[k]:
            i0 = lo_img[eta_y[k], eta_x[k]]
            lower += _increment(kind, float(i0), delta, w1, w2, n_p, mu)
            lo_img[eta_y[k], eta_x[k]] = i0 + 1
        if not (valid_bb[k] and valid_lo[k]):
            n_invalid += 1
    # restore the buffers to zero so the caller can reuse them without a
    # full-image clear (touched cells are a small subset at depth)
    for k in range(n):
        if valid_bb[k]:
            for iy in range(box_y0[k], box_y1[k] + 1):
                for ix in range(box_x0[k], box_x1[k] + 1):
                    up_img[iy, ix] = 0
        if valid_lo[k]:
            lo_img[eta_y[k], eta_x[k]] = 0
    return lower, upper, n_invalid


# ---------------------------------------------------------------------------
# per-branch geometry: centre landing plus reachable accumulator range per
# event, as padded-grid indices ready for bound_recursion. These mirror the
# vectorised warp/bbox methods of the models; they exist because the solver
# calls them thousands of times per window.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True, inline="always")
def _clip_range(lo_f, hi_f, margin, size):
    """Round a continuous reach interval to accumulator indices and clip."""
    c0 = _round_i(lo_f) + margin
    c1 = _round_i(hi_f) + margin
    if c0 > size - 1 or c1 < 0:
        raise RuntimeError("an event's reachable rect misses the accumulator grid; "
                           "the padding margin is too small for this search box")
    if c0 < 0:
        c0 = 0
    if c1 > size - 1:
        c1 = size - 1
    return c0, c1


@njit(cache=True, nogil=True)
def branch_inputs_flow(x, y, dt, vx_lo, vx_hi, vy_lo, vy_hi,
                       margin, wp, hp,
                       eta_x, eta_y, valid_lo, bx0, bx1, by0, by1, valid_bb):
    vx0 = 0.5 * (vx_lo + vx_hi)
    vy0 = 0.5 * (vy_lo + vy_hi)
    for k in range(x.shape[0]):
        ex = _round_i(x[k] + vx0 * dt[k]) + margin
        ey = _round_i(y[k] + vy0 * dt[k]) + margin
        eta_x[k] = ex
        eta_y[k] = ey
        valid_lo[k] = 1 if (0 <= ex < wp and 0 <= ey < hp) else 0
        bx0[k], bx1[k] = _clip_range(x[k] + vx_lo * dt[k], x[k] + vx_hi * dt[k],
                                     margin, wp)
        by0[k], by1[k] = _clip_range(y[k] + vy_lo * dt[k], y[k] + vy_hi * dt[k],
                                     margin, hp)
        valid_bb[k] = 1


@njit(cache=True, nogil=True, inline="always")
def _ack_rect_side(a, b, dtk, fd, u0, off_y, w_lo, w_hi, v_lo, v_hi):
    """Warp bounds of one event over a single-sign omega interval."""
    s_lo = math.sin(w_lo * dtk)
    s_hi = math.sin(w_hi * dtk)
    c_a = math.cos(w_lo * dtk)
    c_b = math.cos(w_hi * dtk)
    c_lo = c_a if c_a < c_b else c_b
    c_hi = c_a if c_a > c_b else c_b
    _, _, g_a, h_a = _ack_terms(w_lo, dtk)
    _, _, g_b, h_b = _ack_terms(w_hi, dtk)
    g_lo, g_hi = (g_a, g_b) if g_a <= g_b else (g_b, g_a)
    h_lo, h_hi = (h_a, h_b) if h_a <= h_b else (h_b, h_a)

    if a >= 0.0:
        nas_lo, nas_hi = -a * s_hi, -a * s_lo
        ac_lo, ac_hi = a * c_lo, a * c_hi
    else:
        nas_lo, nas_hi = -a * s_lo, -a * s_hi
        ac_lo, ac_hi = a * c_hi, a * c_lo
    if b >= 0.0:
        bc_lo, bc_hi = b * c_lo, b * c_hi
        bs_lo, bs_hi = b * s_lo, b * s_hi
    else:
        bc_lo, bc_hi = b * c_hi, b * c_lo
        bs_lo, bs_hi = b * s_hi, b * s_lo
    # v*g and v*h: four-corner interval products
    p1 = v_lo * g_lo
    p2 = v_lo * g_hi
    p3 = v_hi * g_lo
    p4 = v_hi * g_hi
    vg_lo = min(min(p1, p2), min(p3, p4))
    vg_hi = max(max(p1, p2), max(p3, p4))
    q1 = v_lo * h_lo
    q2 = v_lo * h_hi
    q3 = v_hi * h_lo
    q4 = v_hi * h_hi
    vh_lo = min(min(q1, q2), min(q3, q4))
    vh_hi = max(max(q1, q2), max(q3, q4))

    x_lo = nas_lo + bc_lo + fd * vg_lo + u0
    x_hi = nas_hi + bc_hi + fd * vg_hi + u0
    y_lo = bs_lo + fd * vh_lo + ac_lo + off_y
    y_hi = bs_hi + fd * vh_hi + ac_hi + off_y
    return x_lo, x_hi, y_lo, y_hi


@njit(cache=True, nogil=True)
def branch_inputs_ackermann(a, b, dt, fd, u0, off_y,
                            w_lo, w_hi, v_lo, v_hi, margin, wp, hp,
                            eta_x, eta_y, valid_lo, bx0, bx1, by0, by1, valid_bb):
    w0 = 0.5 * (w_lo + w_hi)
    v0 = 0.5 * (v_lo + v_hi)
    straddles = w_lo < 0.0 < w_hi
    for k in range(a.shape[0]):
        dtk = dt[k]
        s, c, g, h = _ack_terms(w0, dtk)
        xw = -a[k] * s + b[k] * c + fd * (v0 * g) + u0
        yw = b[k] * s + fd * (v0 * h) + a[k] * c + off_y
        ex = _round_i(xw) + margin
        ey = _round_i(yw) + margin
        eta_x[k] = ex
        eta_y[k] = ey
        valid_lo[k] = 1 if (0 <= ex < wp and 0 <= ey < hp) else 0
        if straddles:
            x_lo1, x_hi1, y_lo1, y_hi1 = _ack_rect_side(
                a[k], b[k], dtk, fd, u0, off_y, w_lo, 0.0, v_lo, v_hi)
            x_lo2, x_hi2, y_lo2, y_hi2 = _ack_rect_side(
                a[k], b[k], dtk, fd, u0, off_y, 0.0, w_hi, v_lo, v_hi)
            x_lo = min(x_lo1, x_lo2)
            x_hi = max(x_hi1, x_hi2)
            y_lo = min(y_lo1, y_lo2)
            y_hi = max(y_hi1, y_hi2)
        else:
            x_lo, x_hi, y_lo, y_hi = _ack_rect_side(
                a[k], b[k], dtk, fd, u0, off_y, w_lo, w_hi, v_lo, v_hi)
        bx0[k], bx1[k] = _clip_range(x_lo, x_hi, margin, wp)
        by0[k], by1[k] = _clip_range(y_lo, y_hi, margin, hp)
        valid_bb[k] = 1


@njit(cache=True, nogil=True)
def branch_inputs_rotation(bearings, dt, f, u0, v0,
                           w0x, w0y, w0z, half_diag, cos_phi, sin_phi,
                           margin, wp, hp,
                           eta_x, eta_y, valid_lo, bx0, bx1, by0, by1, valid_bb):
    """Rotation cones projected to rects, one event at a time.

    half_diag is half the omega-box diagonal; the cone half-angle per event is
    half_diag * dt. cos_phi/sin_phi carry a precomputed ring of boundary
    sample angles.
    """
    w0n = math.sqrt(w0x * w0x + w0y * w0y + w0z * w0z)
    m = cos_phi.shape[0]
    for k in range(bearings.shape[0]):
        fx = bearings[k, 0]
        fy = bearings[k, 1]
        fz = bearings[k, 2]
        ang = w0n * dt[k]
        if ang < 1e-12:
            ax_, ay_, az_ = fx, fy, fz
        else:
            ux = w0x / w0n
            uy = w0y / w0n
            uz = w0z / w0n
            ca = math.cos(ang)
            sa = math.sin(ang)
            dot = ux * fx + uy * fy + uz * fz
            ax_ = fx * ca + (uy * fz - uz * fy) * sa + ux * dot * (1.0 - ca)
            ay_ = fy * ca + (uz * fx - ux * fz) * sa + uy * dot * (1.0 - ca)
            az_ = fz * ca + (ux * fy - uy * fx) * sa + uz * dot * (1.0 - ca)
        if az_ > 0.0:
            ex = _round_i(f * ax_ / az_ + u0) + margin
            ey = _round_i(f * ay_ / az_ + v0) + margin
            eta_x[k] = ex
            eta_y[k] = ey
            valid_lo[k] = 1 if (0 <= ex < wp and 0 <= ey < hp) else 0
        else:
            eta_x[k] = 0
            eta_y[k] = 0
            valid_lo[k] = 0
        alpha = half_diag * dt[k]
        sin_a = math.sin(alpha)
        cos_a = math.cos(alpha)
        z_min = cos_a * az_ - sin_a * math.sqrt(max(0.0, 1.0 - az_ * az_))
        if z_min <= 1e-9:
            valid_bb[k] = 0
            bx0[k] = 0
            bx1[k] = wp - 1
            by0[k] = 0
            by1[k] = hp - 1
            continue
        # ring frame: seed away from near-parallel z
        if abs(az_) > 0.999:
            sx, sy, sz = 1.0, 0.0, 0.0
        else:
            sx, sy, sz = 0.0, 0.0, 1.0
        e1x = ay_ * sz - az_ * sy
        e1y = az_ * sx - ax_ * sz
        e1z = ax_ * sy - ay_ * sx
        n1 = math.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
        e1x /= n1
        e1y /= n1
        e1z /= n1
        e2x = ay_ * e1z - az_ * e1y
        e2y = az_ * e1x - ax_ * e1z
        e2z = ax_ * e1y - ay_ * e1x
        x_lo = 1e300
        x_hi = -1e300
        y_lo = 1e300
        y_hi = -1e300
        for j in range(m):
            rx = cos_a * ax_ + sin_a * (cos_phi[j] * e1x + sin_phi[j] * e2x)
            ry = cos_a * ay_ + sin_a * (cos_phi[j] * e1y + sin_phi[j] * e2y)
            rz = cos_a * az_ + sin_a * (cos_phi[j] * e1z + sin_phi[j] * e2z)
            px = f * rx / rz + u0
            py = f * ry / rz + v0
            if px < x_lo:
                x_lo = px
            if px > x_hi:
                x_hi = px
            if py < y_lo:
                y_lo = py
            if py > y_hi:
                y_hi = py
        pad = (2.0 * f * sin_a / (z_min * z_min)) * (math.pi / m)
        bx0[k], bx1[k] = _clip_range(x_lo - pad, x_hi + pad, margin, wp)
        by0[k], by1[k] = _clip_range(y_lo - pad, y_hi + pad, margin, hp)
        valid_bb[k] = 1


# ---------------------------------------------------------------------------
# brute-force objective enumeration (oracles for the solver)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True, inline="always")
def _finish_theta(img, tx, ty, n_touched, kind, delta, w1, w2, n_p, mu):
    """Sum the objective over touched cells, add the empty-cell baseline,
    and reset the scratch image."""
    value = (n_p - n_touched) * _cell_value(kind, np.int64(0), delta, w1, w2, n_p, mu)
    for j in range(n_touched):
        value += _cell_value(kind, img[ty[j], tx[j]], delta, w1, w2, n_p, mu)
        img[ty[j], tx[j]] = 0
    return value


@njit(cache=True, nogil=True)
def objectives_flow(x, y, dt, thetas, width, height, margin,
                    kind, delta, w1, w2, mu):
    """Full objective at each velocity in `thetas` (m, 2)."""
    h = height + 2 * margin
    w = width + 2 * margin
    n_p = float(h * w)
    img = np.zeros((h, w), dtype=np.int64)
    tx = np.empty(x.shape[0], dtype=np.int64)
    ty = np.empty(x.shape[0], dtype=np.int64)
    out = np.empty(thetas.shape[0])
    for j in range(thetas.shape[0]):
        vx = thetas[j, 0]
        vy = thetas[j, 1]
        n_touched = 0
        for k in range(x.shape[0]):
            ix = _round_i(x[k] + vx * dt[k]) + margin
            iy = _round_i(y[k] + vy * dt[k]) + margin
            if 0 <= ix < w and 0 <= iy < h:
                c = img[iy, ix]
                if c == 0:
                    tx[n_touched] = ix
                    ty[n_touched] = iy
                    n_touched += 1
                img[iy, ix] = c + 1
        out[j] = _finish_theta(img, tx, ty, n_touched, kind, delta, w1, w2, n_p, mu)
    return out


@njit(cache=True, nogil=True, inline="always")
def _ack_terms(omega, dtk):
    u = omega * dtk
    s = math.sin(u)
    c = math.cos(u)
    if abs(u) < 1e-4:
        g = omega * dtk * dtk * (0.5 - u * u / 24.0)
        hh = dtk * (1.0 - u * u / 6.0)
    else:
        g = (1.0 - c) / omega
        hh = s / omega
    return s, c, g, hh


@njit(cache=True, nogil=True)
def objectives_ackermann(a, b, dt, thetas, fd, u0, off_y, width, height, margin,
                         kind, delta, w1, w2, mu):
    """Full objective at each (omega, v) in `thetas` (m, 2).

    a, b are the per-event constants y - v0 + l*fd and x - u0; off_y is
    -l*fd + v0.
    """
    h = height + 2 * margin
    w = width + 2 * margin
    n_p = float(h * w)
    img = np.zeros((h, w), dtype=np.int64)
    tx = np.empty(a.shape[0], dtype=np.int64)
    ty = np.empty(a.shape[0], dtype=np.int64)
    out = np.empty(thetas.shape[0])
    for j in range(thetas.shape[0]):
        omega = thetas[j, 0]
        v = thetas[j, 1]
        n_touched = 0
        for k in range(a.shape[0]):
            s, c, g, hh = _ack_terms(omega, dt[k])
            xw = -a[k] * s + b[k] * c + fd * (v * g) + u0
            yw = b[k] * s + fd * (v * hh) + a[k] * c + off_y
            ix = _round_i(xw) + margin
            iy = _round_i(yw) + margin
            if 0 <= ix < w and 0 <= iy < h:
                cc = img[iy, ix]
                if cc == 0:
                    tx[n_touched] = ix
                    ty[n_touched] = iy
                    n_touched += 1
                img[iy, ix] = cc + 1
        out[j] = _finish_theta(img, tx, ty, n_touched, kind, delta, w1, w2, n_p, mu)
    return out


@njit(cache=True, nogil=True)
def objectives_ackermann_grid(a, b, dt, omegas, vs, fd, u0, off_y,
                              width, height, margin,
                              kind, delta, w1, w2, mu):
    """Objective over the full (omega, v) product grid, omega-major.

    Hoists the trigonometric terms out of the v loop, which is what makes
    dense exhaustive searches affordable: per omega the warp is affine in v.
    """
    h = height + 2 * margin
    w = width + 2 * margin
    n_p = float(h * w)
    n = a.shape[0]
    img = np.zeros((h, w), dtype=np.int64)
    tx = np.empty(n, dtype=np.int64)
    ty = np.empty(n, dtype=np.int64)
    px = np.empty(n)
    py = np.empty(n)
    gg = np.empty(n)
    hh = np.empty(n)
    out = np.empty((omegas.shape[0], vs.shape[0]))
    for iw in range(omegas.shape[0]):
        omega = omegas[iw]
        for k in range(n):
            s, c, g, hk = _ack_terms(omega, dt[k])
            px[k] = -a[k] * s + b[k] * c + u0
            py[k] = b[k] * s + a[k] * c + off_y
            gg[k] = g
            hh[k] = hk
        for iv in range(vs.shape[0]):
            v = vs[iv]
            n_touched = 0
            for k in range(n):
                ix = _round_i(px[k] + fd * (v * gg[k])) + margin
                iy = _round_i(py[k] + fd * (v * hh[k])) + margin
                if 0 <= ix < w and 0 <= iy < h:
                    cc = img[iy, ix]
                    if cc == 0:
                        tx[n_touched] = ix
                        ty[n_touched] = iy
                        n_touched += 1
                    img[iy, ix] = cc + 1
            out[iw, iv] = _finish_theta(img, tx, ty, n_touched, kind, delta, w1, w2, n_p, mu)
    return out


@njit(cache=True, nogil=True)
def objectives_rotation(bearings, dt, thetas, f, u0, v0, width, height, margin,
                        kind, delta, w1, w2, mu):
    """Full objective at each angular velocity in `thetas` (m, 3).

    Bearings rotated behind the camera are dropped, matching accumulate.
    """
    h = height + 2 * margin
    w = width + 2 * margin
    n_p = float(h * w)
    n = bearings.shape[0]
    img = np.zeros((h, w), dtype=np.int64)
    tx = np.empty(n, dtype=np.int64)
    ty = np.empty(n, dtype=np.int64)
    out = np.empty(thetas.shape[0])
    for j in range(thetas.shape[0]):
        wx = thetas[j, 0]
        wy = thetas[j, 1]
        wz = thetas[j, 2]
        wn = math.sqrt(wx * wx + wy * wy + wz * wz)
        n_touched = 0
        for k in range(n):
            fx = bearings[k, 0]
            fy = bearings[k, 1]
            fz = bearings[k, 2]
            ang = wn * dt[k]
            if ang < 1e-12:
                rx, ry, rz = fx, fy, fz
            else:
                ax = wx / wn
                ay = wy / wn
                az = wz / wn
                ca = math.cos(ang)
                sa = math.sin(ang)
                dot = ax * fx + ay * fy + az * fz
                rx = fx * ca + (ay * fz - az * fy) * sa + ax * dot * (1.0 - ca)
                ry = fy * ca + (az * fx - ax * fz) * sa + ay * dot * (1.0 - ca)
                rz = fz * ca + (ax * fy - ay * fx) * sa + az * dot * (1.0 - ca)
            if rz <= 0.0:
                continue
            ix = _round_i(f * rx / rz + u0) + margin
            iy = _round_i(f * ry / rz + v0) + margin
            if 0 <= ix < w and 0 <= iy < h:
                cc = img[iy, ix]
                if cc == 0:
                    tx[n_touched] = ix
                    ty[n_touched] = iy
                    n_touched += 1
                img[iy, ix] = cc + 1
        out[j] = _finish_theta(img, tx, ty, n_touched, kind, delta, w1, w2, n_p, mu)
    return out
