"""
Synthetic Outbreak Benchmark Generator

Baseline counts follow a log-linear mean with optional trend and harmonics,
drawn from a negative binomial with variance phi * mean (Poisson when phi = 1).
Outbreaks add Poisson(k * sigma_b) cases spread over the following weeks by a
log-normal delay.

Usage:
    from synthgen.generator import generate_bundle
    from synthgen.grid import load_grid

    grid = load_grid("config/test_cases.json")
    bundle = generate_bundle(grid.get(0), n_series=100, seed=7)
"""

from typing import List, Optional, Set, Tuple, Union

import numpy as np

from core.rng import RngStream, derive_stream
from core.types import CountSeries, OutbreakSpan, SeriesBundle, SeriesRecord
from synthgen.grid import TestCaseSpec
from utils.config import SynthgenConfig
from utils.errors import GenerationError
from utils.logger import get_logger

logger = get_logger(__name__)

WEEKS_PER_YEAR = 52.0


def baseline_mean(spec: TestCaseSpec, t: Union[int, np.ndarray]):
    """
    Expected baseline count mu_b(t)

        exp(theta + beta t + g1 cos(2 pi t/52) + g2 sin(2 pi t/52)
                           + g3 cos(4 pi t/52) + g4 sin(4 pi t/52))
    """
    t_arr = np.asarray(t, dtype=float)
    omega = 2.0 * np.pi * t_arr / WEEKS_PER_YEAR
    g1, g2, g3, g4 = spec.gamma
    log_mu = (
        spec.theta
        + spec.beta * t_arr
        + g1 * np.cos(omega)
        + g2 * np.sin(omega)
        + g3 * np.cos(2.0 * omega)
        + g4 * np.sin(2.0 * omega)
    )
    mu = np.exp(log_mu)
    return float(mu) if np.ndim(t) == 0 else mu


def baseline_std(spec: TestCaseSpec, t: int) -> float:
    """Theoretical baseline standard deviation sqrt(phi * mu_b(t))"""
    return float(np.sqrt(spec.phi * baseline_mean(spec, t)))


def sample_baseline(
    spec: TestCaseSpec,
    rng: RngStream,
    n_weeks: int = 624,
    series_id: str = "baseline",
) -> CountSeries:
    """
    Draw one outbreak-free series

    Each week is independent: NB with mean mu_b(t) and variance phi * mu_b(t),
    i.e. numpy's negative_binomial(n = mu / (phi - 1), p = 1 / phi).
    """
    mu = baseline_mean(spec, np.arange(n_weeks))
    gen = rng.generator
    if spec.is_poisson:
        counts = gen.poisson(mu)
    else:
        counts = gen.negative_binomial(mu / (spec.phi - 1.0), 1.0 / spec.phi)
    return CountSeries.from_array(series_id, counts)


def _first_peak(totals: np.ndarray, injected: np.ndarray, start_week: int) -> int:
    """Earliest active week with the largest total count"""
    active = np.flatnonzero(injected > 0)
    best = active[np.argmax(totals[active])]
    return start_week + int(best)


def inject_outbreak(
    counts: np.ndarray,
    spec: TestCaseSpec,
    start_week: int,
    k: float,
    rng: RngStream,
    delay_sigma: float = 0.5,
    max_attempts: int = 1000,
) -> Tuple[np.ndarray, OutbreakSpan]:
    """
    Add one outbreak starting at start_week

    N ~ Poisson(k * sigma_b(start_week)) cases, each delayed by
    floor(LogNormal(0, delay_sigma)) weeks. Cases past the end of the series
    are dropped; draws leaving no case inside the series are repeated.

    Returns:
        (new counts array, OutbreakSpan)

    Raises:
        GenerationError: if no non-empty outbreak is drawn within max_attempts
    """
    counts = np.asarray(counts, dtype=np.int64)
    n_weeks = counts.size
    if not 0 <= start_week < n_weeks:
        raise ValueError(f"start_week {start_week} outside series of length {n_weeks}")

    lam = k * baseline_std(spec, start_week)
    gen = rng.generator
    for _ in range(max_attempts):
        n_cases = int(gen.poisson(lam))
        if n_cases == 0:
            continue
        delays = np.floor(gen.lognormal(0.0, delay_sigma, size=n_cases)).astype(np.int64)
        delays = delays[start_week + delays < n_weeks]
        if delays.size:
            break
    else:
        raise GenerationError(
            test_case=spec.id,
            reason="no non-empty outbreak drawn",
            start_week=start_week,
            k=k,
        )

    injected = np.bincount(delays)
    new_counts = counts.copy()
    new_counts[start_week : start_week + injected.size] += injected

    span = OutbreakSpan(
        start_week=start_week,
        injected_cases=tuple(int(c) for c in injected),
        peak_week=_first_peak(new_counts[start_week : start_week + injected.size], injected, start_week),
        size_param_k=float(k),
    )
    return new_counts, span


def _draw_k(spec: TestCaseSpec, gen: np.random.Generator, k_range: Tuple[int, int]) -> int:
    if spec.k_mode == "fixed":
        return int(spec.k_fixed)
    return int(gen.integers(k_range[0], k_range[1] + 1))


def generate_series(
    spec: TestCaseSpec,
    series_index: int,
    seed: int,
    settings: Optional[SynthgenConfig] = None,
) -> SeriesRecord:
    """Generate one series with its baseline and evaluation outbreaks"""
    settings = settings or SynthgenConfig()
    n_weeks = settings.total_weeks
    series_id = f"tc{spec.id:02d}-s{series_index:03d}"

    base = sample_baseline(
        spec, derive_stream(seed, (spec.id, series_index, "baseline")), n_weeks, series_id
    )
    rng = derive_stream(seed, (spec.id, series_index, "outbreaks"))
    gen = rng.generator
    counts = base.array

    baseline_spans: List[OutbreakSpan] = []
    taken: Set[int] = set()
    attempts = 0
    lo, hi = settings.baseline_start_range
    while len(baseline_spans) < settings.baseline_outbreaks:
        attempts += 1
        if attempts > settings.max_attempts:
            raise GenerationError(
                test_case=spec.id,
                reason="baseline outbreak placement exhausted max_attempts",
                series=series_index,
                placed=len(baseline_spans),
            )
        start = int(gen.integers(lo, hi + 1))
        k = _draw_k(spec, gen, settings.k_range)
        candidate, span = inject_outbreak(
            counts, spec, start, k, rng, settings.delay_sigma, settings.max_attempts
        )
        active = set(span.active_weeks)
        if max(active) >= settings.baseline_len or active & taken:
            continue
        counts = candidate
        taken |= active
        baseline_spans.append(span)

    lo, hi = settings.eval_start_range
    start = int(gen.integers(lo, hi + 1))
    k = _draw_k(spec, gen, settings.k_range)
    counts, eval_span = inject_outbreak(
        counts, spec, start, k, rng, settings.delay_sigma, settings.max_attempts
    )

    return SeriesRecord(
        series=CountSeries.from_array(series_id, counts),
        # chronological order keeps span ids stable across runs
        baseline_spans=tuple(sorted(baseline_spans, key=lambda s: s.start_week)),
        eval_spans=(eval_span,),
    )


def generate_bundle(
    spec: TestCaseSpec,
    n_series: int = 100,
    seed: int = 7,
    settings: Optional[SynthgenConfig] = None,
) -> SeriesBundle:
    """
    Generate all series of one test case

    Args:
        spec: Test case parameters
        n_series: Number of series
        seed: Experiment seed
        settings: Generator settings (window sizes, start ranges, k range)

    Returns:
        SeriesBundle satisfying the partition invariants

    Raises:
        GenerationError: if outbreak placement fails
    """
    settings = settings or SynthgenConfig()
    records = [generate_series(spec, i, seed, settings) for i in range(n_series)]

    bundle = SeriesBundle(
        test_case_id=spec.id,
        series=tuple(records),
        baseline_len=settings.baseline_len,
        eval_len=settings.eval_len,
        baseline_outbreaks=settings.baseline_outbreaks,
    )
    logger.debug(
        "Bundle generated",
        test_case=spec.id,
        series=n_series,
        structure=spec.structure,
        k_mode=spec.k_mode,
    )
    return bundle
