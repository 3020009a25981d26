"""
ROC and Detection-Rate Curves

Both curves sweep the alarm threshold over the distinct scores in descending
order (tied scores flip together). The x axis is the false alarm rate over
non-outbreak weeks. The y axis is
- roc_curve: the fraction of outbreak weeks alarmed
- detection_curve: the fraction of outbreaks with at least one alarmed
  active week

partial_auc integrates the piecewise-linear curve over [0, e] and divides by
e, so a chance-level curve scores e/2.

Usage:
    from evaluation.curves import dauc, pauc

    d = dauc(scores, span_ids, e=0.01)
    p = pauc(scores, span_ids >= 0, e=0.01)
"""

from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.errors import InvalidCurveInputError


class ScoredWeek(BaseModel):
    """One evaluated week: higher alarm_score means more alarming"""

    model_config = ConfigDict(frozen=True)

    series: int
    week: int
    alarm_score: float = Field(ge=0.0, le=1.0)
    is_outbreak_week: bool
    span_id: Optional[int] = None

    @model_validator(mode="after")
    def validate_span(self):
        if (self.span_id is not None) != self.is_outbreak_week:
            raise ValueError("span_id is set exactly on outbreak weeks")
        return self


def scored_arrays(weeks: Iterable[ScoredWeek]) -> Tuple[np.ndarray, np.ndarray]:
    """(scores, span_ids) arrays from ScoredWeek records; span_id -1 off outbreaks"""
    weeks = list(weeks)
    scores = np.array([w.alarm_score for w in weeks], dtype=float)
    span_ids = np.array([w.span_id if w.span_id is not None else -1 for w in weeks], dtype=np.int64)
    return scores, span_ids


class Curve:
    """Piecewise-linear curve from (0, 0) to (1, 1), monotone in both axes"""

    def __init__(self, x: np.ndarray, y: np.ndarray, thresholds: Optional[np.ndarray] = None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.size < 2:
            raise InvalidCurveInputError("curve needs matching x/y with at least two vertices")
        if (x[0], y[0]) != (0.0, 0.0) or (x[-1], y[-1]) != (1.0, 1.0):
            raise InvalidCurveInputError("curve must run from (0,0) to (1,1)")
        if np.any(np.diff(x) < 0) or np.any(np.diff(y) < 0):
            raise InvalidCurveInputError("curve must be monotone")
        self.x = x
        self.y = y
        self.thresholds = thresholds

    @property
    def vertices(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __len__(self) -> int:
        return self.x.size

    def to_frame(self, method: str) -> pd.DataFrame:
        return pd.DataFrame({"method": method, "x": self.x, "y": self.y})


def _sweep(negatives: np.ndarray, positives: np.ndarray) -> Curve:
    """
    Vertices for thresholds at every distinct score, highest first

    At threshold theta a unit counts as alarmed when its score >= theta.
    """
    thresholds = np.unique(np.concatenate([negatives, positives]))[::-1]
    neg_sorted = np.sort(negatives)
    pos_sorted = np.sort(positives)
    # count of values >= theta = n - (count of values < theta)
    fp = neg_sorted.size - np.searchsorted(neg_sorted, thresholds, side="left")
    tp = pos_sorted.size - np.searchsorted(pos_sorted, thresholds, side="left")

    x = np.concatenate([[0.0], fp / neg_sorted.size])
    y = np.concatenate([[0.0], tp / pos_sorted.size])
    keep = np.concatenate([[True], (np.diff(x) != 0) | (np.diff(y) != 0)])
    return Curve(x[keep], y[keep], np.concatenate([[np.inf], thresholds])[keep])


def _validate_scores(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size == 0:
        raise InvalidCurveInputError("scores must be a non-empty 1-D array")
    if np.isnan(scores).any():
        raise InvalidCurveInputError("scores contain NaN")
    return scores


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> Curve:
    """
    Week-level ROC curve

    Args:
        scores: Alarm scores
        labels: True on outbreak weeks

    Raises:
        InvalidCurveInputError: without both outbreak and non-outbreak weeks
    """
    scores = _validate_scores(scores)
    labels = np.asarray(labels, dtype=bool)
    if labels.shape != scores.shape:
        raise InvalidCurveInputError("labels and scores differ in length")
    if labels.all() or not labels.any():
        raise InvalidCurveInputError("need outbreak and non-outbreak weeks", positives=int(labels.sum()))
    return _sweep(scores[~labels], scores[labels])


def span_maxima(scores: np.ndarray, span_ids: np.ndarray) -> np.ndarray:
    """Highest score within each span (spans ordered by id)"""
    in_span = span_ids >= 0
    ids, inverse = np.unique(span_ids[in_span], return_inverse=True)
    maxima = np.full(ids.size, -np.inf)
    np.maximum.at(maxima, inverse, scores[in_span])
    return maxima


def detection_curve(scores: np.ndarray, span_ids: np.ndarray) -> Curve:
    """
    Detection-rate curve

    Args:
        scores: Alarm scores
        span_ids: Span id per week, -1 on non-outbreak weeks (ids must be
            unique across series, e.g. offset per series)

    Raises:
        InvalidCurveInputError: without spans or without non-outbreak weeks
    """
    scores = _validate_scores(scores)
    span_ids = np.asarray(span_ids, dtype=np.int64)
    if span_ids.shape != scores.shape:
        raise InvalidCurveInputError("span ids and scores differ in length")
    in_span = span_ids >= 0
    if not in_span.any():
        raise InvalidCurveInputError("no outbreak spans")
    if in_span.all():
        raise InvalidCurveInputError("no non-outbreak weeks")
    return _sweep(scores[~in_span], span_maxima(scores, span_ids))


def partial_auc(curve: Curve, e: float = 0.01) -> float:
    """
    Area under the curve on [0, e] divided by e

    Raises:
        InvalidCurveInputError: if e is outside (0, 1]
    """
    if not 0.0 < e <= 1.0:
        raise InvalidCurveInputError("e must lie in (0, 1]", e=e)

    x, y = curve.x, curve.y
    inside = x <= e
    xs, ys = x[inside], y[inside]
    if xs[-1] < e:
        nxt = int(np.argmax(~inside))
        x0, y0, x1, y1 = x[nxt - 1], y[nxt - 1], x[nxt], y[nxt]
        xs = np.append(xs, e)
        ys = np.append(ys, y0 + (y1 - y0) * (e - x0) / (x1 - x0))

    area = float(np.sum(np.diff(xs) * (ys[1:] + ys[:-1]) / 2.0))
    return float(np.clip(area / e, 0.0, 1.0))


def pauc(scores: np.ndarray, labels: np.ndarray, e: float = 0.01) -> float:
    """Partial area under the week-level ROC curve"""
    return partial_auc(roc_curve(scores, labels), e)


def dauc(scores: np.ndarray, span_ids: np.ndarray, e: float = 0.01) -> float:
    """Partial area under the detection-rate curve"""
    return partial_auc(detection_curve(scores, span_ids), e)


def metric_column(metric: str, e: float) -> str:
    """Result column name, e.g. dauc_1pct for e = 0.01"""
    return f"{metric}_{e * 100:g}pct"
