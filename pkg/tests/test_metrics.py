"""Return smoothing and the relative-stability metric."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from actpc import MetricUndefinedError, r_stability, rolling_mean


def brute_force_rs(series, k_e, window):
    """Independent reimplementation: trailing mean via explicit slices."""
    arr = [float(x) for x in series]
    smoothed = []
    for i in range(len(arr)):
        chunk = arr[max(0, i - window + 1) : i + 1]
        smoothed.append(sum(chunk) / len(chunk))
    tail_raw = arr[-k_e:]
    tail_smooth = smoothed[-k_e:]
    best = max(tail_raw)
    return sum(abs((s - best) / best) for s in tail_smooth) / k_e


class TestRollingMean:
    def test_window_two_worked_example(self):
        assert np.allclose(rolling_mean([1, 2, 3], 2), [1.0, 1.5, 2.5])

    def test_window_one_is_identity(self):
        x = [3.0, -1.0, 2.0]
        assert np.allclose(rolling_mean(x, 1), x)

    def test_window_larger_than_series_gives_running_mean(self):
        assert np.allclose(rolling_mean([2, 4], 100), [2.0, 3.0])

    def test_invalid_window_rejected(self):
        with pytest.raises(ValueError):
            rolling_mean([1.0], 0)


class TestRStability:
    def test_worked_example(self):
        # series [1,1,1,2], k_e=2, smoothing window 2:
        # smoothed tail (1, 1.5), best raw 2 -> (0.5 + 0.25)/2 = 0.375
        assert r_stability([1, 1, 1, 2], k_e=2, smooth_window=2) == pytest.approx(0.375)

    def test_constant_positive_series_is_exactly_zero(self):
        assert r_stability([5.0] * 300, k_e=100) == 0.0

    def test_undefined_when_window_max_not_positive(self):
        with pytest.raises(MetricUndefinedError):
            r_stability([1.0] * 200 + [-1.0, 0.0], k_e=2)

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            r_stability([1.0, 2.0], k_e=100)

    def test_matches_brute_force_on_random_series(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(100, 400))
            series = rng.uniform(0.1, 10.0, size=n)
            k_e = int(rng.integers(1, 101))
            window = int(rng.integers(1, 120))
            got = r_stability(series, k_e=k_e, smooth_window=window)
            want = brute_force_rs(series, k_e, window)
            assert got == pytest.approx(want, abs=1e-12)

    @given(st.lists(st.floats(0.5, 50), min_size=100, max_size=150))
    @settings(max_examples=30, deadline=None)
    def test_nonnegative_for_positive_series(self, series):
        assert r_stability(series, k_e=100) >= 0.0
