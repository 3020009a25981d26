"""
Stacking Datasets

Every (series, week) pair becomes one row. Column order:

    [mean] then <det>_lag<w> ... <det>_lag1 for each lag, then <det>_lag0

Mode P uses raw p-values, mode S alarm indicators 1{p <= alpha}. Cells with
no detector output (insufficient history or a lag reaching before week 0)
hold the "no evidence" value: 1.0 in mode P, 0 in mode S.

Usage:
    from stacking.features import assemble

    train, evaluation = assemble(bundle, ["C1", "RKI"], FusionConfig.parse("P(mu,O3,1)"))
    model = fit(train.features, train.target, params)
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.types import CountSeries, SeriesBundle
from detectors.algorithms import PValueMatrix, run_detectors
from detectors.window import rolling_window_mean
from stacking.config import FusionConfig
from stacking.labels import label_outbreaks
from utils.errors import SchemaMismatchError
from utils.logger import get_logger

logger = get_logger(__name__)


def feature_columns(detectors: Sequence[str], config: FusionConfig) -> List[str]:
    """Column names in the order build_features emits them"""
    columns = ["mean"] if config.include_mean else []
    for lag in range(config.window, 0, -1):
        columns.extend(f"{det}_lag{lag}" for det in detectors)
    columns.extend(f"{det}_lag0" for det in detectors)
    return columns


class StackDataset:
    """
    Feature matrix, binary targets and the (series, week) of every row

    span_id is -1 on weeks without an active outbreak.
    """

    def __init__(
        self,
        columns: Sequence[str],
        features: np.ndarray,
        target: Optional[np.ndarray] = None,
        series: Optional[np.ndarray] = None,
        week: Optional[np.ndarray] = None,
        span_id: Optional[np.ndarray] = None,
    ):
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n = features.shape[0]
        if features.shape[1] != len(columns):
            raise SchemaMismatchError("dataset", list(columns), [f"{features.shape[1]} columns"])

        self.columns: Tuple[str, ...] = tuple(columns)
        self.features = features
        self.target = np.zeros(n, dtype=np.int8) if target is None else np.asarray(target, dtype=np.int8)
        self.series = np.zeros(n, dtype=np.int64) if series is None else np.asarray(series, dtype=np.int64)
        self.week = np.arange(n, dtype=np.int64) if week is None else np.asarray(week, dtype=np.int64)
        self.span_id = np.full(n, -1, dtype=np.int64) if span_id is None else np.asarray(span_id, dtype=np.int64)

        for name in ("target", "series", "week", "span_id"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have one entry per row")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def __len__(self) -> int:
        return self.n_rows

    @property
    def positives(self) -> int:
        return int(self.target.sum())

    def subset(self, mask: np.ndarray) -> "StackDataset":
        return StackDataset(
            self.columns,
            self.features[mask],
            self.target[mask],
            self.series[mask],
            self.week[mask],
            self.span_id[mask],
        )

    @classmethod
    def concat(cls, parts: Sequence["StackDataset"]) -> "StackDataset":
        if not parts:
            raise ValueError("nothing to concatenate")
        columns = parts[0].columns
        for part in parts[1:]:
            if part.columns != columns:
                raise SchemaMismatchError("dataset", list(columns), list(part.columns))
        return cls(
            columns,
            np.vstack([p.features for p in parts]),
            np.concatenate([p.target for p in parts]),
            np.concatenate([p.series for p in parts]),
            np.concatenate([p.week for p in parts]),
            np.concatenate([p.span_id for p in parts]),
        )

    def to_frame(self) -> pd.DataFrame:
        """Feature columns followed by target"""
        frame = pd.DataFrame(self.features, columns=list(self.columns))
        frame["target"] = self.target.astype(np.int64)
        return frame

    def index_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"series": self.series, "week": self.week, "span_id": self.span_id}
        )

    @classmethod
    def from_frames(cls, data: pd.DataFrame, index: pd.DataFrame) -> "StackDataset":
        if "target" not in data.columns:
            raise SchemaMismatchError("dataset", ["...", "target"], list(data.columns))
        if len(data) != len(index):
            raise SchemaMismatchError("dataset index", [f"{len(data)} rows"], [f"{len(index)} rows"])
        columns = [c for c in data.columns if c != "target"]
        return cls(
            columns,
            data[columns].to_numpy(dtype=float),
            data["target"].to_numpy(dtype=np.int8),
            index["series"].to_numpy(dtype=np.int64),
            index["week"].to_numpy(dtype=np.int64),
            index["span_id"].to_numpy(dtype=np.int64),
        )


# ============================================================================
# Feature Construction
# ============================================================================


def detector_outputs(pmatrix: PValueMatrix, config: FusionConfig) -> np.ndarray:
    """Per-week detector outputs with undefined cells imputed"""
    if config.mode == "P":
        return np.where(pmatrix.defined, pmatrix.values, 1.0)
    alarms = np.zeros(pmatrix.values.shape)
    alarms[pmatrix.defined] = (pmatrix.values[pmatrix.defined] <= config.alpha).astype(float)
    return alarms


def build_features(
    pmatrix: PValueMatrix,
    series: CountSeries,
    config: FusionConfig,
) -> StackDataset:
    """
    Feature rows for every week of one series

    Args:
        pmatrix: Detector p-values aligned with the series
        series: The count series (for the mean feature)
        config: Fusion configuration

    Returns:
        StackDataset with zero targets (labels are attached by assemble)
    """
    n = len(series)
    if pmatrix.n_weeks != n:
        raise SchemaMismatchError("pvalues", [f"{n} weeks"], [f"{pmatrix.n_weeks} weeks"])

    outputs = detector_outputs(pmatrix, config)
    fill = 1.0 if config.mode == "P" else 0.0

    blocks = []
    if config.include_mean:
        blocks.append(rolling_window_mean(series.array, config.mean_window)[:, None])
    for lag in range(config.window, 0, -1):
        shifted = np.full_like(outputs, fill)
        if lag < n:
            shifted[lag:] = outputs[: n - lag]
        blocks.append(shifted)
    blocks.append(outputs)

    features = np.hstack(blocks)
    return StackDataset(feature_columns(pmatrix.detectors, config), features)


def vote_scores(pmatrix: PValueMatrix, alpha: float = 0.005) -> np.ndarray:
    """Fraction of detectors alarming (p <= alpha) each week"""
    alarms = pmatrix.defined & (np.nan_to_num(pmatrix.values, nan=1.0) <= alpha)
    return alarms.mean(axis=1) if alarms.shape[1] else np.zeros(pmatrix.n_weeks)


def assemble(
    bundle: SeriesBundle,
    detectors: Sequence[str],
    config: FusionConfig,
    pmatrices: Optional[Sequence[PValueMatrix]] = None,
    m: int = 7,
    variance_divisor: str = "m",
    rki_threshold: float = 20.0,
) -> Tuple[StackDataset, StackDataset]:
    """
    Training and evaluation datasets for one test case

    Training rows are the baseline weeks of every series, labeled per
    config.labeling. Evaluation rows are the remaining weeks, labeled with
    the full active period (O0) and carrying span ids.

    Args:
        bundle: Generated test case
        detectors: Detector set
        config: Fusion configuration
        pmatrices: Precomputed p-values per series (computed when omitted)
        m, variance_divisor, rki_threshold: Detector settings when computing

    Returns:
        (train, eval)
    """
    detectors = list(detectors)
    train_parts: List[StackDataset] = []
    eval_parts: List[StackDataset] = []

    for idx, record in enumerate(bundle.series):
        series = record.series
        if pmatrices is not None:
            pmatrix = pmatrices[idx]
            if list(pmatrix.detectors) != detectors:
                pmatrix = PValueMatrix(
                    detectors,
                    np.column_stack([pmatrix.column(d) for d in detectors]),
                    np.column_stack([pmatrix.defined_column(d) for d in detectors]),
                )
        else:
            pmatrix = run_detectors(series, detectors, m, variance_divisor, rki_threshold)

        rows = build_features(pmatrix, series, config)
        n = len(series)
        full = StackDataset(
            rows.columns,
            rows.features,
            target=label_outbreaks(series, record.baseline_spans, config.labeling),
            series=np.full(n, idx),
            week=np.arange(n),
            span_id=record.span_id_array(),
        )
        baseline = full.week < bundle.baseline_len

        train_parts.append(full.subset(baseline))
        evaluation = full.subset(~baseline)
        evaluation.target = label_outbreaks(series, record.eval_spans, "O0")[~baseline]
        eval_parts.append(evaluation)

    train = StackDataset.concat(train_parts)
    evaluation = StackDataset.concat(eval_parts)
    logger.debug(
        "Datasets assembled",
        test_case=bundle.test_case_id,
        method=config.notation,
        train_rows=train.n_rows,
        eval_rows=evaluation.n_rows,
        train_positives=train.positives,
    )
    return train, evaluation
