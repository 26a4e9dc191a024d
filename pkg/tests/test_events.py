import numpy as np
import pytest
from hypothesis import given, strategies as st

from eventcm import Event, EventStream, EventWindow, downsample, slice_windows


def make_stream(ts):
    ts = np.asarray(ts, dtype=float)
    n = ts.size
    return EventStream(np.arange(n, dtype=float), np.arange(n, dtype=float),
                       ts, np.ones(n, dtype=np.int8))


class TestEvent:
    def test_polarity_must_be_sign(self):
        Event(1.0, 2.0, 0.0, 1)
        Event(1.0, 2.0, 0.0, -1)
        with pytest.raises(ValueError):
            Event(1.0, 2.0, 0.0, 0)


class TestStreamInvariants:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError, match="sorted"):
            make_stream([0.0, 0.2, 0.1])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            EventStream(np.zeros(2), np.zeros(3), np.zeros(2), np.ones(2, dtype=np.int8))

    def test_window_timestamps_inside_span(self):
        with pytest.raises(ValueError):
            EventWindow(np.zeros(1), np.zeros(1), np.array([0.5]),
                        np.ones(1, dtype=np.int8), t_ref=0.0, duration=0.1)


class TestSliceWindows:
    def test_boundary_partition(self):
        windows = slice_windows(make_stream([0.001, 0.009, 0.011]), 0.01)
        assert [len(w) for w in windows] == [2, 1]
        assert windows[0].t_ref == pytest.approx(0.001)
        assert windows[1].t_ref == pytest.approx(0.011)

    def test_window_longer_than_span(self):
        windows = slice_windows(make_stream([0.0, 0.004, 0.005]), 1.0)
        assert len(windows) == 1
        assert len(windows[0]) == 3

    def test_uniform_khz_stream(self):
        # 1 kHz for 0.1 s: ten windows of ten events each
        ts = np.arange(100) * 0.001
        windows = slice_windows(make_stream(ts), 0.01)
        assert len(windows) == 10
        assert all(len(w) == 10 for w in windows)

    def test_empty_stream(self):
        assert slice_windows(EventStream.empty(), 0.01) == []

    def test_event_on_edge_goes_right(self):
        windows = slice_windows(make_stream([0.0, 0.01]), 0.01)
        assert [len(w) for w in windows] == [1, 1]

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=60),
           st.floats(0.01, 0.5))
    def test_partition_property(self, ts, window_len):
        stream = make_stream(sorted(ts))
        windows = slice_windows(stream, window_len)
        assert sum(len(w) for w in windows) == len(stream)
        start = stream.t[0]
        for i, w in enumerate(windows):
            assert w.t_ref == pytest.approx(start + i * window_len)
            if len(w):
                assert np.all(w.t >= w.t_ref - 1e-12)
                assert np.all(w.t < w.t_ref + window_len + 1e-12)


class TestDownsample:
    def _window(self, n):
        ts = np.arange(n) * 1e-3
        return EventWindow(np.arange(n, dtype=float), np.zeros(n), ts,
                           np.ones(n, dtype=np.int8), 0.0, n * 1e-3)

    def test_keeps_every_mth(self):
        out = downsample(self._window(10), 2)
        assert len(out) == 5
        np.testing.assert_array_equal(out.x, [0, 2, 4, 6, 8])

    def test_identity(self):
        w = self._window(5)
        assert downsample(w, 1) is w

    def test_factor_three(self):
        out = downsample(self._window(7), 3)
        assert len(out) == 3
        np.testing.assert_array_equal(out.x, [0, 3, 6])

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            downsample(self._window(3), 0)
