"""Return-curve smoothing and the relative-stability metric."""

from __future__ import annotations

import numpy as np

from .errors import MetricUndefinedError

DEFAULT_WINDOW = 100


def rolling_mean(series, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Trailing mean over ``window`` values (including the current one);
    the prefix averages whatever is available."""
    if window < 1:
        raise ValueError("window must be >= 1")
    arr = np.asarray(series, dtype=np.float64)
    out = np.empty_like(arr)
    csum = np.cumsum(arr)
    for i in range(len(arr)):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


def r_stability(
    series, k_e: int = 100, smooth_window: int = DEFAULT_WINDOW
) -> float:
    """Mean absolute relative error of the smoothed tail of a return series
    against the best raw return in that tail; 0 means perfectly stable."""
    arr = np.asarray(series, dtype=np.float64)
    if k_e < 1:
        raise ValueError("k_e must be >= 1")
    if len(arr) < k_e:
        raise ValueError(f"series length {len(arr)} < k_e={k_e}")
    window = arr[-k_e:]
    best = window.max()
    if best <= 0:
        raise MetricUndefinedError(
            "relative stability undefined: max return in window is <= 0"
        )
    smoothed = rolling_mean(arr, smooth_window)[-k_e:]
    return float(np.mean(np.abs((smoothed - best) / best)))
