"""
Outbreak Labelings

Training targets derived from annotated spans:
    O0  every active week
    O1  active weeks from the start through the peak
    O2  O1 weeks whose total count strictly increased on the week before
    O3  the peak week only

Weeks outside every span are 0.
"""

from typing import Iterable, Literal

import numpy as np

from core.types import CountSeries, OutbreakSpan

Labeling = Literal["O0", "O1", "O2", "O3"]
LABELINGS = ("O0", "O1", "O2", "O3")


def span_weeks(series: CountSeries, span: OutbreakSpan, strategy: Labeling) -> np.ndarray:
    """Week indices of one span labeled positive under `strategy`"""
    active = np.asarray(span.active_weeks, dtype=np.int64)
    if strategy == "O0":
        return active
    through_peak = active[active <= span.peak_week]
    if strategy == "O1":
        return through_peak
    if strategy == "O2":
        counts = series.array
        # week 0 has no predecessor; treat it as rising from zero
        previous = np.where(through_peak > 0, counts[np.maximum(through_peak - 1, 0)], 0)
        return through_peak[counts[through_peak] > previous]
    if strategy == "O3":
        return np.array([span.peak_week], dtype=np.int64)
    raise ValueError(f"Unknown labeling: {strategy}")


def label_outbreaks(
    series: CountSeries,
    spans: Iterable[OutbreakSpan],
    strategy: Labeling = "O0",
) -> np.ndarray:
    """
    Binary target per week of the series

    Args:
        series: Count series (total observed counts, used by O2)
        spans: Annotated outbreaks of the series
        strategy: O0, O1, O2 or O3

    Returns:
        int8 array of length len(series)
    """
    if strategy not in LABELINGS:
        raise ValueError(f"Unknown labeling: {strategy}")
    target = np.zeros(len(series), dtype=np.int8)
    for span in spans:
        weeks = span_weeks(series, span, strategy)
        target[weeks[weeks < len(series)]] = 1
    return target
