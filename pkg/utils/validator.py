"""
Validators for Outbreak Stacking

Schema checks for every persisted table and the stage manifest model:
- bundle, p-value, dataset index, results, ranks, curve and k-sweep CSVs
- value ranges (non-negative counts, p-values in [0, 1], binary flags)
- stage manifests (pydantic)

Usage:
    from utils.validator import validate_frame, BUNDLE_COLUMNS

    frame = pd.read_csv(path)
    validate_frame(frame, "bundle", BUNDLE_COLUMNS)
"""

from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from utils.errors import InvalidSeriesError, SchemaMismatchError
from utils.logger import get_logger

logger = get_logger(__name__)


# ============================================================================
# Table Schemas
# ============================================================================

BUNDLE_COLUMNS = ["test_case", "series", "week", "count", "outbreak_active", "span_id"]
PVALUE_COLUMNS = ["test_case", "series", "week", "detector", "p_value", "defined"]
INDEX_COLUMNS = ["series", "week", "span_id"]
RESULT_COLUMNS = ["test_case", "method"]
RANK_COLUMNS = ["method", "subset", "avg_rank"]
CURVE_COLUMNS = ["method", "x", "y"]
K_SWEEP_COLUMNS = ["method", "k", "test_case"]


def validate_frame(frame: pd.DataFrame, schema: str, expected: Sequence[str], exact: bool = True) -> pd.DataFrame:
    """
    Check a table's header

    Args:
        frame: Loaded table
        schema: Schema name for error messages
        expected: Required columns (in order when exact)
        exact: Require exactly these columns in this order; otherwise only
            require them as a prefix

    Raises:
        SchemaMismatchError: on any header drift
    """
    got = list(frame.columns)
    ok = got == list(expected) if exact else got[: len(expected)] == list(expected)
    if not ok:
        raise SchemaMismatchError(schema, list(expected), got)
    return frame


def validate_binary(values: pd.Series, schema: str, column: str) -> None:
    if not values.isin([0, 1]).all():
        raise SchemaMismatchError(schema, [f"{column} in {{0,1}}"], [str(v) for v in values.unique()[:5]])


def validate_bundle_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Header, non-negative counts and consistent outbreak flags"""
    validate_frame(frame, "bundle", BUNDLE_COLUMNS)
    if (frame["count"] < 0).any():
        bad = frame.loc[frame["count"] < 0, "series"].iloc[0]
        raise InvalidSeriesError(str(bad), "negative count")
    validate_binary(frame["outbreak_active"], "bundle", "outbreak_active")
    if (frame["span_id"].notna() != (frame["outbreak_active"] == 1)).any():
        raise SchemaMismatchError("bundle", ["span_id set iff outbreak_active"], ["inconsistent rows"])
    return frame


def validate_pvalue_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Header and p-values in [0, 1] on defined cells"""
    validate_frame(frame, "pvalues", PVALUE_COLUMNS)
    validate_binary(frame["defined"], "pvalues", "defined")
    defined = frame["defined"] == 1
    p = frame.loc[defined, "p_value"]
    if p.isna().any() or ((p < 0) | (p > 1)).any():
        raise SchemaMismatchError("pvalues", ["p_value in [0,1] where defined"], ["out of range"])
    return frame


def validate_result_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """test_case,method prefix, one row per pair, metric columns in [0, 1]"""
    validate_frame(frame, "results", RESULT_COLUMNS, exact=False)
    metrics = list(frame.columns[len(RESULT_COLUMNS) :])
    if not metrics:
        raise SchemaMismatchError("results", RESULT_COLUMNS + ["<metric>"], list(frame.columns))
    duplicated = frame.duplicated(RESULT_COLUMNS)
    if duplicated.any():
        pairs = frame.loc[duplicated, RESULT_COLUMNS].astype(str).agg(":".join, axis=1)
        raise SchemaMismatchError("results", ["one row per (test_case, method)"], pairs.tolist()[:5])
    for column in metrics:
        values = frame[column]
        if not pd.api.types.is_numeric_dtype(values) or ((values < 0) | (values > 1)).any():
            raise SchemaMismatchError("results", [f"{column} in [0,1]"], ["out of range or non-numeric"])
    return frame


def validate_dataset_frames(data: pd.DataFrame, index: pd.DataFrame) -> None:
    validate_frame(index, "dataset index", INDEX_COLUMNS)
    if "target" not in data.columns or data.columns[-1] != "target":
        raise SchemaMismatchError("dataset", ["...", "target"], list(data.columns))
    validate_binary(data["target"], "dataset", "target")
    if len(data) != len(index):
        raise SchemaMismatchError("dataset", [f"{len(index)} rows"], [f"{len(data)} rows"])


# ============================================================================
# Stage Manifest
# ============================================================================


class StageManifest(BaseModel):
    """Audit record written by every pipeline stage"""

    stage: str
    seed: int
    config_hash: str = Field(min_length=8)
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    timings_ms: Dict[str, float] = Field(default_factory=dict)
    parameters: Dict[str, Any] = Field(default_factory=dict)
    created_at: Optional[str] = None


def check_finite(values: np.ndarray, name: str) -> None:
    """Reject NaN/inf in feature matrices before training"""
    if not np.isfinite(values).all():
        raise SchemaMismatchError(name, ["finite values"], ["NaN or inf present"])
