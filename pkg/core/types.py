"""
Shared Domain Types for Outbreak Stacking

Immutable pydantic models shared by every package:
- CountSeries: weekly infection counts with identity metadata
- OutbreakSpan: one injected epidemic (weeks, per-week cases, peak)
- SeriesRecord: a series with its baseline and evaluation spans
- SeriesBundle: all series of one synthetic test case

Week indices are 0-based everywhere.
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class CountSeries(BaseModel):
    """Weekly case counts c_0..c_{n-1}"""

    model_config = ConfigDict(frozen=True)

    series_id: str
    counts: Tuple[int, ...] = Field(min_length=1)
    origin_week: int = 0

    @field_validator("counts")
    @classmethod
    def validate_counts(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(c < 0 for c in v):
            raise ValueError("counts must be non-negative")
        return v

    @classmethod
    def from_array(cls, series_id: str, counts, origin_week: int = 0) -> "CountSeries":
        """Build from any integer array-like"""
        arr = np.asarray(counts)
        if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("counts must be integral")
        return cls(
            series_id=series_id,
            counts=tuple(int(c) for c in arr.tolist()),
            origin_week=origin_week,
        )

    @property
    def array(self) -> np.ndarray:
        """Counts as an int64 array (fresh copy)"""
        return np.asarray(self.counts, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.counts)


class OutbreakSpan(BaseModel):
    """
    An annotated epidemic period

    injected_cases[i] is the number of outbreak cases added to week
    start_week + i. Active weeks are those with injected cases > 0.
    """

    model_config = ConfigDict(frozen=True)

    start_week: int = Field(ge=0)
    injected_cases: Tuple[int, ...] = Field(min_length=1)
    peak_week: int
    size_param_k: float = Field(gt=0.0)

    @field_validator("injected_cases")
    @classmethod
    def validate_injected(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(c < 0 for c in v):
            raise ValueError("injected cases must be non-negative")
        if not any(c > 0 for c in v):
            raise ValueError("an outbreak needs at least one injected case")
        return v

    @model_validator(mode="after")
    def validate_peak(self):
        if self.peak_week not in self.active_weeks:
            raise ValueError("peak_week must be an active week of the span")
        return self

    @property
    def end_week(self) -> int:
        """Last week covered by the span (inclusive)"""
        return self.start_week + len(self.injected_cases) - 1

    @property
    def active_weeks(self) -> Tuple[int, ...]:
        return tuple(
            self.start_week + i for i, c in enumerate(self.injected_cases) if c > 0
        )

    @property
    def total_cases(self) -> int:
        return int(sum(self.injected_cases))


class SeriesRecord(BaseModel):
    """One generated series with its annotated outbreaks"""

    model_config = ConfigDict(frozen=True)

    series: CountSeries
    baseline_spans: Tuple[OutbreakSpan, ...] = ()
    eval_spans: Tuple[OutbreakSpan, ...] = ()

    @property
    def spans(self) -> Tuple[OutbreakSpan, ...]:
        """Baseline spans first, then evaluation spans (span_id = position)"""
        return self.baseline_spans + self.eval_spans

    def injected_array(self) -> np.ndarray:
        """Per-week injected cases summed over all spans"""
        injected = np.zeros(len(self.series), dtype=np.int64)
        for span in self.spans:
            injected[span.start_week : span.end_week + 1] += np.asarray(span.injected_cases)
        return injected

    def span_id_array(self) -> np.ndarray:
        """Per-week span id of the active span, -1 where no outbreak is active"""
        ids = np.full(len(self.series), -1, dtype=np.int64)
        for span_id, span in enumerate(self.spans):
            ids[list(span.active_weeks)] = span_id
        return ids


class SeriesBundle(BaseModel):
    """All series of one test case, partitioned into baseline and evaluation weeks"""

    model_config = ConfigDict(frozen=True)

    test_case_id: int = Field(ge=0)
    series: Tuple[SeriesRecord, ...]
    baseline_len: int = Field(default=575, gt=0)
    eval_len: int = Field(default=49, gt=0)
    baseline_outbreaks: int = Field(default=4, ge=0)

    @model_validator(mode="after")
    def validate_partitions(self):
        total = self.baseline_len + self.eval_len
        for idx, record in enumerate(self.series):
            sid = record.series.series_id
            if len(record.series) != total:
                raise ValueError(f"series {sid}: length {len(record.series)} != {total}")
            if len(record.baseline_spans) != self.baseline_outbreaks:
                raise ValueError(f"series {sid}: expected {self.baseline_outbreaks} baseline spans")
            if len(record.eval_spans) != 1:
                raise ValueError(f"series {sid}: expected exactly one evaluation span")

            seen: set = set()
            for span in record.baseline_spans:
                active = set(span.active_weeks)
                if max(active) >= self.baseline_len:
                    raise ValueError(f"series {sid}: baseline outbreak leaks into evaluation weeks")
                if active & seen:
                    raise ValueError(f"series {sid}: baseline outbreaks overlap")
                seen |= active
            for span in record.eval_spans:
                if min(span.active_weeks) < self.baseline_len or span.end_week >= total:
                    raise ValueError(f"series {sid}: evaluation outbreak outside evaluation weeks")
        return self

    @property
    def total_weeks(self) -> int:
        return self.baseline_len + self.eval_len

    def __len__(self) -> int:
        return len(self.series)

    def records(self) -> List[SeriesRecord]:
        return list(self.series)
