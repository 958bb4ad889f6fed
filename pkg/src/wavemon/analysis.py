"""Small trace-analysis helpers: oscillation period, first passage,
ensemble statistics."""

from __future__ import annotations

import numpy as np


def estimate_period(times: np.ndarray, values: np.ndarray) -> float:
    """Oscillation period of a trace, from the first peak of its
    autocorrelation after the initial decay.

    Works on clean (possibly drifting) oscillations; raises when no
    repeating structure is present.
    """
    times = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if len(x) < 8 or len(x) != len(times):
        raise ValueError("need a trace of at least 8 samples")
    dt = float(times[1] - times[0])
    x = x - x.mean()
    if not x.any():
        raise ValueError("trace is constant; no period")
    n = len(x)
    ac = np.correlate(x, x, mode="full")[n - 1:]
    ac = ac / (n - np.arange(n))  # unbiased: removes the triangular taper
    ac = ac / ac[0]
    max_lag = (3 * n) // 4  # unbiased estimate gets noisy at large lags
    # first sign change marks a half period; take the max after it
    below = np.nonzero(ac[:max_lag] < 0)[0]
    if below.size == 0:
        raise ValueError("no oscillation detected in trace")
    start = below[0]
    lag = start + int(np.argmax(ac[start:max_lag]))
    if ac[lag] <= 0:
        raise ValueError("no repeating structure after first zero crossing")
    if 0 < lag < max_lag - 1:
        # parabolic interpolation for sub-sample peak position
        y0, y1, y2 = ac[lag - 1], ac[lag], ac[lag + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            lag = lag + 0.5 * (y0 - y2) / denom
    return float(lag) * dt


def first_passage_time(times: np.ndarray, values: np.ndarray, level: float) -> float:
    """First time the trace reaches ``level``; NaN if it never does."""
    values = np.asarray(values, dtype=float)
    hits = np.nonzero(values >= level)[0]
    if hits.size == 0:
        return float("nan")
    return float(np.asarray(times, dtype=float)[hits[0]])


def mean_and_se(traces: np.ndarray):
    """Column-wise mean and standard error over a stack of traces."""
    traces = np.atleast_2d(np.asarray(traces, dtype=float))
    n = traces.shape[0]
    mean = traces.mean(axis=0)
    se = traces.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def nondecreasing_within(traces: np.ndarray, n_se: float = 2.0) -> bool:
    """True when the ensemble-mean trace never drops between consecutive
    samples by more than ``n_se`` standard errors of the paired difference."""
    traces = np.atleast_2d(np.asarray(traces, dtype=float))
    diffs = np.diff(traces, axis=1)
    mean_d, se_d = mean_and_se(diffs)
    slack = n_se * se_d + 1e-12
    return bool(np.all(mean_d >= -slack))
