"""
Sliding-Window Statistics

Reference-window mean mu(t) and variance sigma^2(t) over the m counts
c_{t-m}..c_{t-1} that precede week t.

The scalar window_stats() follows the displayed formulas directly; the array
helpers compute the same values for every week at once for run_detectors().
"""

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field

from core.types import CountSeries
from utils.errors import InsufficientHistoryError


def ddof_for(variance_divisor: str) -> int:
    """Map the configured divisor ("m" or "m-1") to numpy's ddof"""
    return 0 if variance_divisor == "m" else 1


class WindowStats(BaseModel):
    """Mean and variance of the reference window before week t"""

    model_config = ConfigDict(frozen=True)

    mu: float
    sigma2: float = Field(ge=0.0)
    m: int = Field(default=7, ge=1)


def window_stats(
    series: CountSeries,
    t: int,
    m: int = 7,
    variance_divisor: str = "m",
) -> WindowStats:
    """
    Mean and variance of c_{t-m}..c_{t-1}

    Args:
        series: Count series
        t: Week index (needs t >= m)
        m: Window length
        variance_divisor: "m" (population variance) or "m-1"

    Raises:
        InsufficientHistoryError: if t < m
    """
    if t < m:
        raise InsufficientHistoryError(week=t, required=m)
    if t > len(series):
        raise IndexError(f"week {t} beyond series of length {len(series)}")

    window = np.asarray(series.counts[t - m : t], dtype=float)
    ddof = ddof_for(variance_divisor)
    # m = 1 with ddof = 1 has no spread estimate; treat as zero variance
    sigma2 = float(window.var(ddof=ddof)) if window.size > ddof else 0.0
    return WindowStats(mu=float(window.mean()), sigma2=max(sigma2, 0.0), m=m)


def rolling_window_stats(
    counts: np.ndarray,
    m: int = 7,
    variance_divisor: str = "m",
) -> Tuple[np.ndarray, np.ndarray]:
    """
    mu(t) and sigma^2(t) for every week of a series

    Returns:
        (mu, sigma2) arrays of len(counts); NaN where t < m
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    mu = np.full(n, np.nan)
    sigma2 = np.full(n, np.nan)
    if n <= m:
        return mu, sigma2

    # windows[j] = counts[j : j + m] is the reference window of week j + m
    windows = sliding_window_view(counts[:-1], m)
    ddof = ddof_for(variance_divisor)
    mu[m:] = windows.mean(axis=1)
    if m > ddof:
        sigma2[m:] = np.maximum(windows.var(axis=1, ddof=ddof), 0.0)
    else:
        sigma2[m:] = 0.0
    return mu, sigma2


def rolling_window_mean(counts: np.ndarray, m: int = 7) -> np.ndarray:
    """
    Mean of the (up to) m counts preceding each week

    Weeks with fewer than m predecessors average what is available; week 0
    has no history and gets 0.0.
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    csum = np.concatenate([[0.0], np.cumsum(counts)])
    t = np.arange(n)
    lo = np.maximum(t - m, 0)
    width = t - lo
    total = csum[t] - csum[lo]
    return np.divide(total, width, out=np.zeros(n), where=width > 0)
