"""
Statistical Surveillance Algorithms

EARS C1/C2/C3, Bayes and RKI, each returning a one-tailed p-value per week
from the m reference counts that precede it. Small p-values flag unusually
high counts.

Usage:
    from detectors.algorithms import run_detectors

    pmatrix = run_detectors(series, ["C1", "Bayes", "RKI"], m=7)
    rki = pmatrix.column("RKI")
"""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.types import CountSeries
from detectors.distributions import (
    gaussian_upper_tail,
    negbin_upper_tail,
    poisson_upper_tail,
    standard_normal_upper_tail,
)
from detectors.window import rolling_window_stats
from utils.errors import InsufficientHistoryError, SchemaMismatchError
from utils.logger import get_logger

logger = get_logger(__name__)


DETECTOR_NAMES: Tuple[str, ...] = ("C1", "C2", "C3", "Bayes", "RKI")

# Extra weeks of history beyond m each detector needs
_EXTRA_HISTORY: Dict[str, int] = {"C1": 0, "C2": 2, "C3": 4, "Bayes": 0, "RKI": 0}


def required_history(name: str, m: int = 7) -> int:
    """First week index at which detector `name` is defined"""
    if name not in _EXTRA_HISTORY:
        raise KeyError(f"Unknown detector: {name}")
    return m + _EXTRA_HISTORY[name]


# ============================================================================
# Column computations (whole series at once)
# ============================================================================


def _shift(values: np.ndarray, lag: int) -> np.ndarray:
    """values[t - lag] aligned at t; NaN where t < lag"""
    out = np.full_like(values, np.nan, dtype=float)
    if lag < values.size:
        out[lag:] = values[: values.size - lag]
    return out


def _c2_zscores(c: np.ndarray, mu: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """z(u) = (c_u - mu(u-2)) / sd(u-2); degenerate windows give 0 or +inf"""
    mu2 = _shift(mu, 2)
    s22 = _shift(sigma2, 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (c - mu2) / np.sqrt(s22)
    degenerate = s22 == 0
    z = np.where(degenerate, np.where(c > mu2, np.inf, 0.0), z)
    return z


def _column(
    name: str,
    c: np.ndarray,
    mu: np.ndarray,
    sigma2: np.ndarray,
    m: int,
    rki_threshold: float,
) -> np.ndarray:
    """p-values of one detector for every week; NaN where undefined"""
    n = c.size
    start = required_history(name, m)
    p = np.full(n, np.nan)
    if start >= n:
        return p
    t = slice(start, n)

    if name == "C1":
        p[t] = gaussian_upper_tail(c[t], mu[t], sigma2[t])

    elif name == "C2":
        p[t] = gaussian_upper_tail(c[t], _shift(mu, 2)[t], _shift(sigma2, 2)[t])

    elif name == "C3":
        z = _c2_zscores(c, mu, sigma2)
        penalty = np.maximum(0.0, _shift(z, 1) - 1.0) + np.maximum(0.0, _shift(z, 2) - 1.0)
        with np.errstate(invalid="ignore"):
            s = z[t] - penalty[t]
        # a degenerate window with c_t above the mean is an alarm regardless of the penalty
        p[t] = np.where(np.isposinf(z[t]), 0.0, standard_normal_upper_tail(np.where(np.isnan(s), np.inf, s)))

    elif name == "Bayes":
        window_sum = np.rint(mu[t] * m)
        p[t] = negbin_upper_tail(c[t], window_sum + 0.5, m / (m + 1.0))

    elif name == "RKI":
        mu_t = mu[t]
        poisson_branch = mu_t <= rki_threshold
        gauss = gaussian_upper_tail(c[t], mu_t, sigma2[t])
        pois = poisson_upper_tail(c[t], np.floor(mu_t) + 1.0)
        p[t] = np.where(poisson_branch, pois, gauss)

    else:
        raise KeyError(f"Unknown detector: {name}")

    return p


# ============================================================================
# P-Value Matrix
# ============================================================================


class PValueMatrix:
    """
    Per-week, per-detector p-values with a defined mask

    values[t, d] is NaN exactly where defined[t, d] is False.
    """

    def __init__(self, detectors: Sequence[str], values: np.ndarray, defined: np.ndarray):
        values = np.array(values, dtype=float)
        defined = np.array(defined, dtype=bool)
        if values.shape != defined.shape or values.shape[1] != len(detectors):
            raise ValueError("values/defined shapes do not match the detector list")

        values[~defined] = np.nan
        values.setflags(write=False)
        defined.setflags(write=False)

        self.detectors: Tuple[str, ...] = tuple(detectors)
        self.values = values
        self.defined = defined

    @property
    def n_weeks(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.detectors.index(name)]

    def defined_column(self, name: str) -> np.ndarray:
        return self.defined[:, self.detectors.index(name)]

    def to_frame(self, test_case: int, series: int) -> pd.DataFrame:
        """Long format: test_case,series,week,detector,p_value,defined"""
        n, k = self.values.shape
        return pd.DataFrame(
            {
                "test_case": np.full(n * k, test_case, dtype=np.int64),
                "series": np.full(n * k, series, dtype=np.int64),
                "week": np.repeat(np.arange(n, dtype=np.int64), k),
                "detector": np.tile(np.array(self.detectors, dtype=object), n),
                "p_value": self.values.reshape(-1),
                "defined": self.defined.reshape(-1).astype(np.int64),
            }
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, detectors: Optional[Sequence[str]] = None) -> "PValueMatrix":
        """Inverse of to_frame for one (test_case, series) slice"""
        if detectors is None:
            detectors = list(dict.fromkeys(frame["detector"].tolist()))
        wide = frame.pivot(index="week", columns="detector", values="p_value")
        mask = frame.pivot(index="week", columns="detector", values="defined")
        missing = [d for d in detectors if d not in wide.columns]
        if missing:
            raise SchemaMismatchError("pvalues", list(detectors), list(wide.columns))
        wide = wide.sort_index()[list(detectors)]
        mask = mask.sort_index()[list(detectors)]
        return cls(detectors, wide.to_numpy(dtype=float), mask.to_numpy(dtype=np.int64) == 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PValueMatrix):
            return NotImplemented
        return (
            self.detectors == other.detectors
            and np.array_equal(self.defined, other.defined)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def run_detectors(
    series: CountSeries,
    detectors: Iterable[str] = DETECTOR_NAMES,
    m: int = 7,
    variance_divisor: str = "m",
    rki_threshold: float = 20.0,
) -> PValueMatrix:
    """
    Run every requested detector over every week of a series

    Args:
        series: Count series
        detectors: Detector names (subset of C1, C2, C3, Bayes, RKI)
        m: Reference window length
        variance_divisor: "m" or "m-1"
        rki_threshold: RKI switches from Poisson to Gaussian above this mean

    Returns:
        PValueMatrix aligned with the series weeks
    """
    names: List[str] = list(detectors)
    c = series.array.astype(float)
    mu, sigma2 = rolling_window_stats(c, m=m, variance_divisor=variance_divisor)

    columns = [_column(name, c, mu, sigma2, m, rki_threshold) for name in names]
    values = np.column_stack(columns) if columns else np.empty((c.size, 0))
    weeks = np.arange(c.size)
    defined = np.column_stack([weeks >= required_history(name, m) for name in names]) if names else np.empty((c.size, 0), dtype=bool)

    logger.debug("Detectors run", series_id=series.series_id, weeks=c.size, detectors=names)
    return PValueMatrix(names, values, defined)


# ============================================================================
# Single-week entry points
# ============================================================================


def _single_week(name: str, series: CountSeries, t: int, m: int, **kwargs) -> float:
    start = required_history(name, m)
    if t < start:
        raise InsufficientHistoryError(week=t, required=start, detector=name)
    if t >= len(series):
        raise IndexError(f"week {t} beyond series of length {len(series)}")
    c = series.array[: t + 1].astype(float)
    mu, sigma2 = rolling_window_stats(c, m=m, variance_divisor=kwargs.get("variance_divisor", "m"))
    return float(_column(name, c, mu, sigma2, m, kwargs.get("rki_threshold", 20.0))[t])


def c1_pvalue(series: CountSeries, t: int, m: int = 7, **kwargs) -> float:
    """C1: c_t ~ N(mu(t), sigma^2(t))"""
    return _single_week("C1", series, t, m, **kwargs)


def c2_pvalue(series: CountSeries, t: int, m: int = 7, **kwargs) -> float:
    """C2: c_t ~ N(mu(t-2), sigma^2(t-2)), a two-week gap before the window"""
    return _single_week("C2", series, t, m, **kwargs)


def c3_pvalue(series: CountSeries, t: int, m: int = 7, **kwargs) -> float:
    """C3: C2 z-score at t minus the excess (z - 1)+ of the two previous weeks, against N(0,1)"""
    return _single_week("C3", series, t, m, **kwargs)


def bayes_pvalue(series: CountSeries, t: int, m: int = 7, **kwargs) -> float:
    """Bayes: c_t ~ NB(m * mu(t) + 1/2, m / (m + 1))"""
    return _single_week("Bayes", series, t, m, **kwargs)


def rki_pvalue(series: CountSeries, t: int, m: int = 7, **kwargs) -> float:
    """RKI: Poisson(floor(mu(t)) + 1) when mu(t) <= 20, else C1's Gaussian"""
    return _single_week("RKI", series, t, m, **kwargs)
