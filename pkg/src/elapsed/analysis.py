"""Post-processing of activity traces: period estimates and window statistics."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def _window(trace, t0, t1):
    i0 = int(round(t0 / trace.dt))
    i1 = int(round(t1 / trace.dt))
    if i0 < 0 or i1 >= len(trace.values) or i1 <= i0:
        raise ConfigError(f"window [{t0}, {t1}] not inside the trace")
    return i0, i1


def repetition_error(trace, t0: float, t1: float, lag: int) -> float:
    """max |N(t + lag dt) - N(t)| for t in [t0, t1]."""
    i0, i1 = _window(trace, t0, t1)
    if i1 + lag >= len(trace.values):
        raise ConfigError("lag runs past the end of the trace")
    v = trace.values
    return float(np.max(np.abs(v[i0 + lag:i1 + lag + 1] - v[i0:i1 + 1])))


def best_lag(trace, t0: float, t1: float, lags) -> tuple:
    """(lag, error) minimizing the repetition error over the candidate lags."""
    errs = [(repetition_error(trace, t0, t1, int(l)), int(l)) for l in lags]
    err, lag = min(errs)
    return lag, err


def autocorrelation_peak(trace, t0: float, t1: float, min_lag: int = 1) -> tuple:
    """Lag (in steps) of the highest autocorrelation peak of N on [t0, t1].

    Only local maxima at lags >= min_lag are considered, so the trivial
    peak at zero is skipped.
    """
    i0, i1 = _window(trace, t0, t1)
    x = trace.values[i0:i1 + 1] - np.mean(trace.values[i0:i1 + 1])
    n = len(x)
    denom = float(np.dot(x, x))
    if denom == 0:
        raise ConfigError("constant signal has no autocorrelation peak")
    spec = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(spec * np.conj(spec))[:n] / denom
    # normalize for the shrinking overlap
    ac = ac * n / (n - np.arange(n))
    half = n // 2
    peaks = [k for k in range(max(min_lag, 1), half)
             if ac[k] >= ac[k - 1] and ac[k] >= ac[k + 1]]
    if not peaks:
        raise ConfigError("no autocorrelation peak inside the window")
    k = max(peaks, key=lambda j: ac[j])
    return k, float(ac[k])


def psi_range(trace, t0: float, t1: float) -> float:
    i0, i1 = _window(trace, t0, t1)
    p = trace.psi_values[i0:i1 + 1]
    return float(p.max() - p.min())


def jumps_in(trace, t0: float, t1: float) -> list:
    return [j for j in trace.jumps if t0 <= j[0] <= t1]
