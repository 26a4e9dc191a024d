import math

import numpy as np
import pytest

from eventcm import SearchBox
from eventcm.warps.ackermann import AckermannWarp, RigConfig, _g_term, _h_term


def rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def reference_pose(dt, omega, v, l):
    """Independent composition of the arc motion and the camera offset."""
    r_v = rot_z(omega * dt)
    if abs(omega) > 1e-12:
        t_v = (v / omega) * np.array([1.0 - math.cos(omega * dt),
                                      math.sin(omega * dt), 0.0])
    else:
        t_v = np.array([0.0, v * dt, 0.0])
    t_vc = np.array([0.0, l, 0.0])
    return r_v, -t_vc + t_v + r_v @ t_vc


@pytest.fixture(scope="module")
def centered_rig():
    return RigConfig(f=200.0, u0=119.5, v0=89.5, l=0.0, d=2.0)


@pytest.fixture(scope="module")
def offset_rig():
    return RigConfig(f=180.0, u0=110.0, v0=95.0, l=-0.45, d=0.23)


class TestPose:
    def test_straight_line(self, centered_rig):
        warp = AckermannWarp(centered_rig)
        r, t = warp.pose(1.0, (0.0, 1.0))
        np.testing.assert_allclose(r, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(t, [0.0, 1.0, 0.0], atol=1e-12)

    def test_pure_rotation_about_origin(self, centered_rig):
        warp = AckermannWarp(centered_rig)
        r, t = warp.pose(1.0, (math.pi / 2, 0.0))
        np.testing.assert_allclose(r, rot_z(math.pi / 2), atol=1e-15)
        np.testing.assert_allclose(t, np.zeros(3), atol=1e-15)

    def test_matches_composition_oracle(self, offset_rig):
        warp = AckermannWarp(offset_rig)
        r, t = warp.pose(0.1, (0.5, 0.5))
        r_ref, t_ref = reference_pose(0.1, 0.5, 0.5, offset_rig.l)
        np.testing.assert_allclose(r, r_ref, atol=1e-12)
        np.testing.assert_allclose(t, t_ref, atol=1e-12)


class TestWarp:
    def test_zero_omega_limit(self, offset_rig):
        warp = AckermannWarp(offset_rig)
        fd = offset_rig.f / offset_rig.d
        x, y = warp.warp(np.array([30.0]), np.array([40.0]), np.array([0.08]),
                         (0.0, 0.7))
        assert x[0] == pytest.approx(30.0, abs=1e-12)
        assert y[0] == pytest.approx(40.0 + fd * 0.7 * 0.08, abs=1e-9)

    def test_identity_at_reference(self, offset_rig):
        warp = AckermannWarp(offset_rig)
        x, y = warp.warp(np.array([30.0]), np.array([40.0]), np.array([0.0]),
                         (0.8, -0.3))
        assert x[0] == pytest.approx(30.0, abs=1e-12)
        assert y[0] == pytest.approx(40.0, abs=1e-12)

    @pytest.mark.parametrize("theta", [(0.5, 0.5), (-0.7, 0.3), (0.2, -0.8),
                                       (1e-7, 0.5), (-1e-9, -0.4)])
    def test_matches_homography_composition(self, offset_rig, theta):
        warp = AckermannWarp(offset_rig)
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 239, 300)
        y = rng.uniform(0, 179, 300)
        dt = rng.uniform(0, 0.1, 300)
        xw, yw = warp.warp(x, y, dt, theta)
        xh, yh = warp.warp_homography(x, y, dt, theta)
        np.testing.assert_allclose(xw, xh, atol=1e-9)
        np.testing.assert_allclose(yw, yh, atol=1e-9)

    def test_series_terms_continuous_at_zero(self):
        dt = np.array([0.1])
        for omega in (0.0, 1e-12, 1e-9, 1e-6, 1e-4, 1e-3):
            g_pos = _g_term(omega, dt)[0]
            g_neg = _g_term(-omega, dt)[0]
            assert g_pos == pytest.approx(-g_neg, abs=1e-15)  # odd
            h_pos = _h_term(omega, dt)[0]
            assert h_pos == pytest.approx(0.1, rel=1e-6)      # near dt


class TestBBox:
    @pytest.mark.parametrize("method", ["cases", "interval"])
    @pytest.mark.parametrize("theta", [(0.5, 0.5), (-0.3, 0.2), (0.0, -0.6)])
    def test_degenerate_box_collapses(self, offset_rig, method, theta):
        warp = AckermannWarp(offset_rig, bbox_method=method)
        box = SearchBox(theta, theta)
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 239, 50)
        y = rng.uniform(0, 179, 50)
        dt = rng.uniform(0, 0.1, 50)
        x_lo, x_hi, y_lo, y_hi = warp.bbox(x, y, dt, box)
        xw, yw = warp.warp(x, y, dt, theta)
        np.testing.assert_allclose(x_lo, xw, rtol=0, atol=1e-12)
        np.testing.assert_allclose(x_hi, xw, rtol=0, atol=1e-12)
        np.testing.assert_allclose(y_lo, yw, rtol=0, atol=1e-12)
        np.testing.assert_allclose(y_hi, yw, rtol=0, atol=1e-12)

    def test_trig_terms_use_correct_endpoints(self, offset_rig):
        # independent per-term analysis for an all-positive instance:
        # A, B >= 0, omega and v positive
        rig = offset_rig
        warp = AckermannWarp(rig)
        fd = rig.f / rig.d
        x = np.array([rig.u0 + 30.0])
        y = np.array([rig.v0 - rig.l * fd + 20.0])
        dt = np.array([0.05])
        a = y - rig.v0 + rig.l * fd
        b = x - rig.u0
        w_lo, w_hi, v_lo, v_hi = 0.4, 0.6, 0.4, 0.6
        box = SearchBox((w_lo, v_lo), (w_hi, v_hi))
        x_min, x_max, y_min, y_max = warp.bbox(x, y, dt, box)
        # -A sin and B cos both reach their minimum at omega_max; the v/omega
        # arc term is increasing in both arguments, so its minimum is at
        # (omega_lo, v_lo)
        exp_x_min = (-a * math.sin(w_hi * dt[0]) + b * math.cos(w_hi * dt[0])
                     + fd * v_lo * _g_term(w_lo, dt)[0] + rig.u0)
        exp_x_max = (-a * math.sin(w_lo * dt[0]) + b * math.cos(w_lo * dt[0])
                     + fd * v_hi * _g_term(w_hi, dt)[0] + rig.u0)
        assert x_min[0] == pytest.approx(exp_x_min[0], abs=1e-12)
        assert x_max[0] == pytest.approx(exp_x_max[0], abs=1e-12)
        exp_y_min = (b * math.sin(w_lo * dt[0]) + fd * v_lo * _h_term(w_hi, dt)[0]
                     + a * math.cos(w_hi * dt[0]) - rig.l * fd + rig.v0)
        assert y_min[0] == pytest.approx(exp_y_min[0], abs=1e-12)

    @pytest.mark.parametrize("method", ["cases", "interval"])
    def test_monte_carlo_containment(self, offset_rig, method):
        warp = AckermannWarp(offset_rig, bbox_method=method)
        rng = np.random.default_rng(4)
        for _ in range(20):
            lo = rng.uniform(-0.9, 0.7, 2)
            box = SearchBox(tuple(lo), tuple(lo + rng.uniform(0.05, 0.6, 2)))
            n = 30
            x = rng.uniform(0, 239, n)
            y = rng.uniform(0, 179, n)
            dt = rng.uniform(0, 0.1, n)
            x_lo, x_hi, y_lo, y_hi = warp.bbox(x, y, dt, box)
            for theta in box.sample(500, rng):
                xw, yw = warp.warp(x, y, dt, theta)
                assert np.all(xw >= x_lo - 1e-9) and np.all(xw <= x_hi + 1e-9)
                assert np.all(yw >= y_lo - 1e-9) and np.all(yw <= y_hi + 1e-9)

    def test_cases_nest_inside_interval(self, offset_rig):
        cases = AckermannWarp(offset_rig, bbox_method="cases")
        interval = AckermannWarp(offset_rig, bbox_method="interval")
        rng = np.random.default_rng(5)
        for _ in range(30):
            lo = rng.uniform(-0.9, 0.7, 2)
            box = SearchBox(tuple(lo), tuple(lo + rng.uniform(0.05, 0.6, 2)))
            n = 20
            x = rng.uniform(0, 239, n)
            y = rng.uniform(0, 179, n)
            dt = rng.uniform(0, 0.1, n)
            cx_lo, cx_hi, cy_lo, cy_hi = cases.bbox(x, y, dt, box)
            ix_lo, ix_hi, iy_lo, iy_hi = interval.bbox(x, y, dt, box)
            assert np.all(cx_lo >= ix_lo - 1e-9) and np.all(cx_hi <= ix_hi + 1e-9)
            assert np.all(cy_lo >= iy_lo - 1e-9) and np.all(cy_hi <= iy_hi + 1e-9)

    def test_straddling_box_is_split_and_contains(self, offset_rig):
        warp = AckermannWarp(offset_rig)
        box = SearchBox((-0.3, 0.1), (0.4, 0.5))
        rng = np.random.default_rng(6)
        x = rng.uniform(0, 239, 20)
        y = rng.uniform(0, 179, 20)
        dt = rng.uniform(0, 0.1, 20)
        x_lo, x_hi, y_lo, y_hi = warp.bbox(x, y, dt, box)
        for theta in box.sample(800, rng):
            xw, yw = warp.warp(x, y, dt, theta)
            assert np.all(xw >= x_lo - 1e-9) and np.all(xw <= x_hi + 1e-9)
            assert np.all(yw >= y_lo - 1e-9) and np.all(yw <= y_hi + 1e-9)

    def test_nesting_for_shared_scene_point(self, offset_rig):
        # events from one ground point at increasing timestamps: earlier boxes
        # nest inside later ones (checked empirically on small windows)
        from eventcm.synth import _pixels_at_time
        warp = AckermannWarp(offset_rig)
        rng = np.random.default_rng(7)
        box = SearchBox((0.35, 0.35), (0.65, 0.65))
        failures = 0
        trials = 0
        for _ in range(40):
            p = np.array([[rng.uniform(-0.05, 0.05), rng.uniform(-0.02, 0.06),
                           offset_rig.d]])
            t1, t2 = np.sort(rng.uniform(0.0, 0.05, 2))
            px, py = _pixels_at_time(np.vstack([p, p]), np.array([t1, t2]),
                                     warp, box.center)
            if not (np.all(px >= 0) and np.all(px <= 239)
                    and np.all(py >= 0) and np.all(py <= 179)):
                continue
            trials += 1
            x_lo, x_hi, y_lo, y_hi = warp.bbox(px, py, np.array([t1, t2]), box)
            ok = (x_lo[0] >= x_lo[1] - 1e-9 and x_hi[0] <= x_hi[1] + 1e-9
                  and y_lo[0] >= y_lo[1] - 1e-9 and y_hi[0] <= y_hi[1] + 1e-9)
            failures += not ok
        assert trials >= 20
        assert failures == 0

    def test_validate_box_rejects_large_turn(self, offset_rig):
        warp = AckermannWarp(offset_rig)
        with pytest.raises(ValueError, match="pi/2"):
            warp.validate_box(SearchBox((-20.0, 0.0), (20.0, 1.0)), max_dt=0.1)


class TestHomography:
    def test_matrix_maps_reference_pixel(self, offset_rig):
        # any ground point's pixel at time dt must map back to its reference pixel
        rig = offset_rig
        warp = AckermannWarp(rig)
        theta = (0.45, -0.25)
        rng = np.random.default_rng(8)
        for _ in range(20):
            point = np.array([rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rig.d])
            dt = rng.uniform(0.0, 0.1)
            r, t = warp.pose(dt, theta)
            cam = r.T @ (point - t)
            pixel = np.array([rig.f * cam[0] / cam[2] + rig.u0,
                              rig.f * cam[1] / cam[2] + rig.v0])
            ref = np.array([rig.f * point[0] / point[2] + rig.u0,
                            rig.f * point[1] / point[2] + rig.v0])
            h = warp.homography(dt, theta)
            mapped = h @ np.array([pixel[0], pixel[1], 1.0])
            np.testing.assert_allclose(mapped[:2] / mapped[2], ref, atol=1e-8)
