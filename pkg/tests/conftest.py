import hypothesis
import numpy as np
import pytest

from eventcm import EventWindow
from eventcm.geometry import CameraIntrinsics
from eventcm.warps.ackermann import AckermannWarp, RigConfig
from eventcm.warps.rotation import RotationWarp

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("default")


SENSOR = (240, 180)


@pytest.fixture(scope="session")
def intrinsics():
    return CameraIntrinsics(f=200.0, u0=119.5, v0=89.5)


@pytest.fixture(scope="session")
def rig():
    return RigConfig(f=200.0, u0=119.5, v0=89.5, l=-0.45, d=2.0)


@pytest.fixture(scope="session")
def ackermann(rig):
    return AckermannWarp(rig)


@pytest.fixture(scope="session")
def rotation(intrinsics):
    return RotationWarp(intrinsics)


def random_window(rng, n=120, duration=0.05, sensor=SENSOR, n_sources=20):
    """Events from a few repeated source points: enough structure for the
    contrast objective to mean something."""
    width, height = sensor
    sources_x = rng.uniform(0.15 * width, 0.85 * width, n_sources)
    sources_y = rng.uniform(0.15 * height, 0.85 * height, n_sources)
    pick = rng.integers(0, n_sources, n)
    jitter = rng.normal(0.0, 0.3, (2, n))
    t = np.sort(rng.uniform(0.0, duration, n))
    return EventWindow(sources_x[pick] + jitter[0], sources_y[pick] + jitter[1],
                       t, np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8),
                       t_ref=0.0, duration=duration)


def flow_patch_window(rng, v=(20.0, -10.0), n=2000, duration=0.04, size=40,
                      jitter=0.015, n_lines=8):
    """Flow events over a patch of sharp horizontal/vertical lines.

    Short windows move events by under a pixel, so the contrast objective
    only resolves the velocity if line masses sit close to (but inside) the
    rounding edges: alternating fractional offsets give a penalty onset at
    roughly 1 px/s of misregistration in either direction, and lines are far
    enough apart that nothing inside a ~+-10 px/s search box can merge them.
    """
    base_r = np.round(np.linspace(4, size - 5, n_lines))
    base_c = np.round(np.linspace(5, size - 4, n_lines))
    fr = np.tile([0.44, 0.56], n_lines // 2 + 1)[:n_lines]
    rows = base_r + fr
    cols = base_c + np.roll(fr, 1)
    which = rng.integers(0, 2 * n_lines, n)
    u = rng.uniform(3, size - 3, n)
    t = np.sort(rng.uniform(0, duration, n))
    is_row = which < n_lines
    p0x = np.where(is_row, u, cols[np.minimum(which - n_lines, n_lines - 1)])
    p0y = np.where(is_row, rows[np.minimum(which, n_lines - 1)], u)
    p0 = np.stack([p0x, p0y], 1) + rng.normal(0, jitter, (n, 2))
    x = p0[:, 0] - v[0] * t
    y = p0[:, 1] - v[1] * t
    pol = np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)
    return EventWindow(x, y, t, pol, t_ref=0.0, duration=duration)
