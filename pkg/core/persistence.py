"""
Persistence for Every Pipeline Stage

Writers and readers for the file formats stages exchange:
- bundles:  tc<NN>.csv (test_case,series,week,count,outbreak_active,span_id)
            + tc<NN>.json (span metadata)
- p-values: tc<NN>.csv (test_case,series,week,detector,p_value,defined)
- datasets: tc<NN>_{train,eval}.csv (+ _index.csv with series,week,span_id)
- models:   tc<NN>.json (self-describing forest)
- results:  results.csv, ranks.csv, k_sweep.csv, curves/*.csv
- manifests/<stage>.json

CSV goes through pandas (index=False); JSON through json with sorted keys so
reruns with the same inputs are byte-identical.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.types import CountSeries, OutbreakSpan, SeriesBundle, SeriesRecord
from detectors.algorithms import PValueMatrix
from forest.ensemble import ForestModel
from stacking.features import StackDataset
from utils.errors import MissingInputError, SchemaMismatchError
from utils.logger import get_logger
from utils.validator import (
    CURVE_COLUMNS,
    K_SWEEP_COLUMNS,
    RANK_COLUMNS,
    StageManifest,
    validate_bundle_frame,
    validate_dataset_frames,
    validate_frame,
    validate_pvalue_frame,
    validate_result_frame,
)

logger = get_logger(__name__)

PathLike = Union[str, Path]


def case_stem(test_case_id: int) -> str:
    return f"tc{test_case_id:02d}"


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingInputError(str(path), stage)
    return path


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path: PathLike, stage: str) -> Any:
    path = _require(Path(path), stage)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaMismatchError(path.name, ["valid JSON"], [e.msg]) from e


def write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_csv(path: PathLike, stage: str, **kwargs) -> pd.DataFrame:
    path = _require(Path(path), stage)
    try:
        return pd.read_csv(path, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SchemaMismatchError(path.name, ["parsable CSV"], [type(e).__name__]) from e


# ============================================================================
# Series Bundles
# ============================================================================


def _span_to_dict(span: OutbreakSpan) -> Dict[str, Any]:
    return {
        "start_week": span.start_week,
        "injected_cases": list(span.injected_cases),
        "peak_week": span.peak_week,
        "size_param_k": span.size_param_k,
    }


def bundle_to_frame(bundle: SeriesBundle) -> pd.DataFrame:
    """One row per (series, week)"""
    frames = []
    for idx, record in enumerate(bundle.series):
        n = len(record.series)
        span_ids = record.span_id_array()
        frames.append(
            pd.DataFrame(
                {
                    "test_case": np.full(n, bundle.test_case_id, dtype=np.int64),
                    "series": np.full(n, idx, dtype=np.int64),
                    "week": np.arange(n, dtype=np.int64) + record.series.origin_week,
                    "count": record.series.array,
                    "outbreak_active": (span_ids >= 0).astype(np.int64),
                    "span_id": pd.Series(span_ids).where(span_ids >= 0).astype("Int64"),
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def bundle_metadata(bundle: SeriesBundle) -> Dict[str, Any]:
    return {
        "test_case_id": bundle.test_case_id,
        "baseline_len": bundle.baseline_len,
        "eval_len": bundle.eval_len,
        "baseline_outbreaks": bundle.baseline_outbreaks,
        "series": [
            {
                "index": idx,
                "series_id": record.series.series_id,
                "origin_week": record.series.origin_week,
                "baseline_spans": [_span_to_dict(s) for s in record.baseline_spans],
                "eval_spans": [_span_to_dict(s) for s in record.eval_spans],
            }
            for idx, record in enumerate(bundle.series)
        ],
    }


def write_bundle(bundle: SeriesBundle, directory: PathLike) -> List[Path]:
    directory = Path(directory)
    name = case_stem(bundle.test_case_id)
    csv_path = write_csv(directory / f"{name}.csv", bundle_to_frame(bundle))
    json_path = write_json(directory / f"{name}.json", bundle_metadata(bundle))
    return [csv_path, json_path]


def read_bundle(directory: PathLike, test_case_id: int) -> SeriesBundle:
    """
    Rebuild a SeriesBundle from its CSV and JSON sidecar

    Raises:
        MissingInputError: if either file is absent
        SchemaMismatchError: on header drift or inconsistent files
    """
    directory = Path(directory)
    name = case_stem(test_case_id)
    frame = read_csv(directory / f"{name}.csv", "bundles", dtype={"span_id": "Int64"})
    validate_bundle_frame(frame)
    meta = read_json(directory / f"{name}.json", "bundles")

    records = []
    grouped = {int(k): g for k, g in frame.groupby("series", sort=True)}
    for entry in meta["series"]:
        group = grouped.get(int(entry["index"]))
        if group is None:
            raise SchemaMismatchError("bundle", [f"series {entry['index']}"], ["missing rows"])
        group = group.sort_values("week")
        records.append(
            SeriesRecord(
                series=CountSeries.from_array(
                    entry["series_id"], group["count"].to_numpy(), entry["origin_week"]
                ),
                baseline_spans=tuple(OutbreakSpan(**s) for s in entry["baseline_spans"]),
                eval_spans=tuple(OutbreakSpan(**s) for s in entry["eval_spans"]),
            )
        )

    return SeriesBundle(
        test_case_id=meta["test_case_id"],
        series=tuple(records),
        baseline_len=meta["baseline_len"],
        eval_len=meta["eval_len"],
        baseline_outbreaks=meta["baseline_outbreaks"],
    )


# ============================================================================
# P-Values
# ============================================================================


def write_pvalues(
    test_case_id: int, pmatrices: Sequence[PValueMatrix], directory: PathLike
) -> Path:
    frame = pd.concat(
        [pm.to_frame(test_case_id, idx) for idx, pm in enumerate(pmatrices)], ignore_index=True
    )
    return write_csv(Path(directory) / f"{case_stem(test_case_id)}.csv", frame)


def read_pvalues(
    directory: PathLike, test_case_id: int, detectors: Optional[Sequence[str]] = None
) -> List[PValueMatrix]:
    """P-value matrices per series, in series order"""
    frame = read_csv(Path(directory) / f"{case_stem(test_case_id)}.csv", "pvalues")
    validate_pvalue_frame(frame)
    return [
        PValueMatrix.from_frame(group, detectors)
        for _, group in frame.groupby("series", sort=True)
    ]


# ============================================================================
# Datasets
# ============================================================================


def write_dataset(dataset: StackDataset, directory: PathLike, stem: str) -> List[Path]:
    directory = Path(directory)
    return [
        write_csv(directory / f"{stem}.csv", dataset.to_frame()),
        write_csv(directory / f"{stem}_index.csv", dataset.index_frame()),
    ]


def read_dataset(directory: PathLike, stem: str) -> StackDataset:
    directory = Path(directory)
    data = read_csv(directory / f"{stem}.csv", "datasets")
    index = read_csv(directory / f"{stem}_index.csv", "datasets")
    validate_dataset_frames(data, index)
    return StackDataset.from_frames(data, index)


# ============================================================================
# Models
# ============================================================================


def write_model(model: ForestModel, path: PathLike) -> Path:
    return write_json(path, model.to_dict())


def read_model(path: PathLike) -> ForestModel:
    return ForestModel.from_dict(read_json(path, "models"))


# ============================================================================
# Results
# ============================================================================


def write_results(frame: pd.DataFrame, path: PathLike) -> Path:
    """results.csv or a per-test-case unit table: test_case,method,<metrics...>"""
    return write_csv(path, validate_result_frame(frame))


def read_results(path: PathLike, metric: str) -> pd.DataFrame:
    frame = validate_result_frame(read_csv(path, "results"))
    if metric not in frame.columns:
        raise SchemaMismatchError("results", ["test_case", "method", metric], list(frame.columns))
    return frame


def write_ranks(frame: pd.DataFrame, path: PathLike) -> Path:
    return write_csv(path, validate_frame(frame, "ranks", RANK_COLUMNS))


def read_ranks(path: PathLike) -> pd.DataFrame:
    return validate_frame(read_csv(path, "ranks"), "ranks", RANK_COLUMNS)


def write_curve(frame: pd.DataFrame, path: PathLike) -> Path:
    return write_csv(path, validate_frame(frame, "curve", CURVE_COLUMNS))


def read_curve(path: PathLike) -> pd.DataFrame:
    return validate_frame(read_csv(path, "curves"), "curve", CURVE_COLUMNS)


def write_k_sweep(frame: pd.DataFrame, path: PathLike) -> Path:
    return write_csv(path, validate_frame(frame, "k_sweep", K_SWEEP_COLUMNS, exact=False))


def read_k_sweep(path: PathLike) -> pd.DataFrame:
    return validate_frame(read_csv(path, "k_sweep"), "k_sweep", K_SWEEP_COLUMNS, exact=False)


# ============================================================================
# Manifests
# ============================================================================


def write_manifest(
    out_dir: PathLike,
    stage: str,
    seed: int,
    config_hash: str,
    inputs: Sequence[PathLike] = (),
    outputs: Sequence[PathLike] = (),
    timings_ms: Optional[Dict[str, float]] = None,
    parameters: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write <out>/manifests/<stage>.json"""
    out_dir = Path(out_dir)

    def rel(p: PathLike) -> str:
        p = Path(p)
        try:
            return str(p.relative_to(out_dir))
        except ValueError:
            return str(p)

    manifest = StageManifest(
        stage=stage,
        seed=seed,
        config_hash=config_hash,
        inputs=[rel(p) for p in inputs],
        outputs=[rel(p) for p in outputs],
        timings_ms={k: round(v, 3) for k, v in (timings_ms or {}).items()},
        parameters=parameters or {},
        created_at=datetime.now().isoformat(timespec="seconds"),
    )
    path = write_json(out_dir / "manifests" / f"{stage}.json", manifest.model_dump())
    logger.debug("Manifest written", stage=stage, path=str(path))
    return path


def read_manifest(out_dir: PathLike, stage: str) -> StageManifest:
    return StageManifest.model_validate(
        read_json(Path(out_dir) / "manifests" / f"{stage}.json", stage)
    )
