"""
Tests for the surveillance detectors

Covers the distribution tails against term-by-term oracles, the window
statistics, each detector's defining formula and the illustrated stacking
example replayed week by week.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detectors.algorithms import (
    DETECTOR_NAMES,
    PValueMatrix,
    bayes_pvalue,
    c1_pvalue,
    c2_pvalue,
    c3_pvalue,
    required_history,
    rki_pvalue,
    run_detectors,
)
from detectors.distributions import (
    gaussian_upper_tail,
    negbin_pmf,
    negbin_upper_tail,
    poisson_pmf,
    poisson_upper_tail,
    standard_normal_upper_tail,
)
from detectors.window import rolling_window_mean, rolling_window_stats, window_stats
from synthgen.generator import sample_baseline
from core.rng import derive_stream
from utils.errors import DomainError, InsufficientHistoryError
from tests.test_utils import (
    ILLUSTRATED_COUNTS,
    detector_oracle,
    flat_spec,
    make_series,
    negbin_tail_oracle,
    normal_tail_oracle,
    poisson_tail_oracle,
    series_with_window,
    window_oracle,
)

WINDOW = [0, 2, 1, 3, 2, 1, 5]

counts_strategy = st.lists(st.integers(min_value=0, max_value=40), min_size=7, max_size=7)

SINGLE_WEEK = [
    ("C1", c1_pvalue), ("C2", c2_pvalue), ("C3", c3_pvalue),
    ("Bayes", bayes_pvalue), ("RKI", rki_pvalue),
]


@st.composite
def history_and_week(draw):
    """(m, counts) with enough history for C3 at the last week; spread 0 gives flat windows"""
    m = draw(st.sampled_from([4, 7]))
    level = draw(st.integers(min_value=0, max_value=40))
    spread = draw(st.integers(min_value=0, max_value=25))
    n = m + 5 + draw(st.integers(min_value=0, max_value=3))
    noise = draw(st.lists(st.integers(min_value=0, max_value=spread), min_size=n - 1, max_size=n - 1))
    current = draw(st.integers(min_value=0, max_value=80))
    return m, [level + x for x in noise] + [current]


# ============================================================================
# Distribution Tails
# ============================================================================


class TestDistributions:
    """Upper tails against independent oracles"""

    def test_gaussian_tail(self):
        assert gaussian_upper_tail(5, 2, 16 / 7) == pytest.approx(0.0236, abs=5e-5)
        assert gaussian_upper_tail(5, 2, 16 / 7) == pytest.approx(normal_tail_oracle(5, 2, 16 / 7), rel=1e-9)

    def test_gaussian_zero_variance(self):
        assert gaussian_upper_tail(2, 2, 0) == 1.0
        assert gaussian_upper_tail(1, 2, 0) == 1.0
        assert gaussian_upper_tail(3, 2, 0) == 0.0

    @given(
        mu=st.floats(min_value=-50.0, max_value=50.0),
        d=st.floats(min_value=0.0, max_value=30.0),
        sigma2=st.floats(min_value=0.01, max_value=100.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_gaussian_tail_symmetric(self, mu, d, sigma2):
        total = gaussian_upper_tail(mu + d, mu, sigma2) + gaussian_upper_tail(mu - d, mu, sigma2)
        assert total == pytest.approx(1.0, abs=1e-12)
        assert gaussian_upper_tail(mu, mu, sigma2) == pytest.approx(0.5, abs=1e-15)

    def test_gaussian_negative_variance_rejected(self):
        with pytest.raises(DomainError):
            gaussian_upper_tail(1, 0, -0.5)

    def test_standard_normal_infinities(self):
        assert standard_normal_upper_tail(np.inf) == 0.0
        assert standard_normal_upper_tail(-np.inf) == 1.0
        assert standard_normal_upper_tail(0.0) == pytest.approx(0.5)

    def test_poisson_examples(self):
        assert poisson_upper_tail(5, 3) == pytest.approx(0.18474, abs=1e-5)
        assert poisson_upper_tail(1, 3) == pytest.approx(0.95021, abs=1e-5)
        assert poisson_upper_tail(0, 3) == 1.0

    def test_poisson_invalid_lambda(self):
        with pytest.raises(DomainError):
            poisson_upper_tail(2, 0.0)

    def test_negbin_examples(self):
        assert negbin_upper_tail(1, 14.5, 7 / 8) == pytest.approx(1 - (7 / 8) ** 14.5, rel=1e-9)
        assert negbin_upper_tail(1, 14.5, 7 / 8) == pytest.approx(0.85588, abs=1e-5)
        tail5 = negbin_upper_tail(5, 14.5, 7 / 8)
        assert 0.03 < tail5 < 0.10
        assert tail5 == pytest.approx(negbin_tail_oracle(5, 14.5, 7 / 8), rel=1e-9)

    def test_negbin_invalid_parameters(self):
        with pytest.raises(DomainError):
            negbin_upper_tail(1, 0.0, 0.5)
        with pytest.raises(DomainError):
            negbin_upper_tail(1, 2.0, 1.0)

    def test_array_input_broadcasts(self):
        out = poisson_upper_tail(np.array([0, 1, 5]), 3.0)
        assert isinstance(out, np.ndarray)
        assert out.shape == (3,)

    @given(
        c=st.integers(min_value=0, max_value=60),
        lam=st.floats(min_value=0.1, max_value=40.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_poisson_inclusive_tail(self, c, lam):
        """P(X >= c) - P(X >= c + 1) is the mass at c"""
        diff = poisson_upper_tail(c, lam) - poisson_upper_tail(c + 1, lam)
        assert diff == pytest.approx(poisson_pmf(c, lam), abs=1e-10)
        assert poisson_upper_tail(c, lam) == pytest.approx(poisson_tail_oracle(c, lam), abs=1e-9)

    @given(
        c=st.integers(min_value=0, max_value=40),
        size=st.floats(min_value=0.5, max_value=60.0),
        prob=st.floats(min_value=0.05, max_value=0.95),
    )
    @settings(max_examples=60, deadline=None)
    def test_negbin_inclusive_tail(self, c, size, prob):
        diff = negbin_upper_tail(c, size, prob) - negbin_upper_tail(c + 1, size, prob)
        assert diff == pytest.approx(negbin_pmf(c, size, prob), abs=1e-10)


# ============================================================================
# Window Statistics
# ============================================================================


class TestWindow:
    """Reference window mean and variance"""

    def test_window_stats(self):
        series, t = series_with_window(WINDOW, 5)
        stats = window_stats(series, t)
        assert stats.mu == pytest.approx(2.0)
        assert stats.sigma2 == pytest.approx(16 / 7)

    def test_sample_variance_divisor(self):
        series, t = series_with_window(WINDOW, 5)
        stats = window_stats(series, t, variance_divisor="m-1")
        assert stats.sigma2 == pytest.approx(16 / 6)

    def test_window_needs_history(self):
        series = make_series([1, 2, 3])
        with pytest.raises(InsufficientHistoryError):
            window_stats(series, 2)

    def test_rolling_matches_scalar(self):
        counts = np.array([3, 0, 1, 4, 2, 7, 5, 1, 0, 9, 4, 4])
        mu, sigma2 = rolling_window_stats(counts, m=4)
        assert np.isnan(mu[:4]).all()
        series = make_series(counts)
        for t in range(4, counts.size):
            expected_mu, expected_s2 = window_oracle(counts[t - 4 : t].tolist())
            assert mu[t] == pytest.approx(expected_mu)
            assert sigma2[t] == pytest.approx(expected_s2)
            assert window_stats(series, t, m=4).mu == pytest.approx(expected_mu)

    def test_rolling_mean_short_history(self):
        mean = rolling_window_mean(np.array([4, 2, 6, 8]), m=7)
        assert mean.tolist() == pytest.approx([0.0, 4.0, 3.0, 4.0])


# ============================================================================
# Detectors
# ============================================================================


class TestDetectors:
    """Single-week formulas"""

    def test_c1_example(self):
        series, t = series_with_window(WINDOW, 5)
        assert c1_pvalue(series, t) == pytest.approx(0.0236, abs=5e-5)

    def test_c2_uses_lagged_window(self):
        series = make_series(WINDOW + [0, 0, 5])
        assert c2_pvalue(series, 9) == pytest.approx(0.0236, abs=5e-5)

    def test_bayes_examples(self):
        series, t = series_with_window(WINDOW, 1)
        assert bayes_pvalue(series, t) == pytest.approx(0.85588, abs=1e-5)
        series, t = series_with_window(WINDOW, 5)
        assert bayes_pvalue(series, t) == pytest.approx(negbin_tail_oracle(5, 14.5, 7 / 8), rel=1e-9)

    def test_rki_poisson_branch(self):
        series, t = series_with_window([2] * 7, 5)
        assert rki_pvalue(series, t) == pytest.approx(0.18474, abs=1e-5)

    def test_rki_gaussian_branch(self):
        window = [20, 22, 24, 26, 28, 30, 32]
        series, t = series_with_window(window, 40)
        mu, sigma2 = window_oracle(window)
        assert mu > 20
        assert rki_pvalue(series, t) == pytest.approx(normal_tail_oracle(40, mu, sigma2), rel=1e-9)

    def test_flat_window_degenerate(self):
        series, t = series_with_window([3] * 7, 3)
        assert c1_pvalue(series, t) == 1.0
        series, t = series_with_window([3] * 7, 4)
        assert c1_pvalue(series, t) == 0.0

    def test_c3_infinite_zscore_alarms(self):
        series = make_series([3] * 9 + [3, 3, 4])
        assert c3_pvalue(series, 11) == 0.0

    def test_c3_formula(self):
        counts = np.array([2, 5, 1, 0, 3, 4, 2, 6, 1, 3, 7, 9, 4, 8, 2])
        series = make_series(counts)

        def z(u):
            mu, s2 = window_oracle(counts[u - 9 : u - 2].tolist())
            return (counts[u] - mu) / math.sqrt(s2)

        for t in range(11, counts.size):
            s = z(t) - max(0.0, z(t - 1) - 1.0) - max(0.0, z(t - 2) - 1.0)
            assert c3_pvalue(series, t) == pytest.approx(0.5 * math.erfc(s / math.sqrt(2)), abs=1e-10)

    @pytest.mark.parametrize("name,fn", SINGLE_WEEK)
    @given(case=history_and_week())
    @settings(max_examples=1000, deadline=None)
    def test_matches_plain_formula(self, name, fn, case):
        m, counts = case
        t = len(counts) - 1
        expected = detector_oracle(name, counts, t, m=m)
        assert fn(make_series(counts), t, m=m) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("name,fn", SINGLE_WEEK)
    def test_insufficient_history(self, name, fn):
        series = make_series(range(20))
        first = required_history(name, 7)
        with pytest.raises(InsufficientHistoryError):
            fn(series, first - 1)
        assert 0.0 <= fn(series, first) <= 1.0

    def test_week_beyond_series(self):
        with pytest.raises(IndexError):
            c1_pvalue(make_series([1] * 10), 10)

    def test_required_history(self):
        assert [required_history(n, 7) for n in DETECTOR_NAMES] == [7, 9, 11, 7, 7]
        with pytest.raises(KeyError):
            required_history("CUSUM")

    def test_c2_is_c1_two_weeks_earlier(self):
        """C2 at t on c equals C1 at t-2 on c with c_t moved to t-2"""
        counts = [4, 1, 0, 6, 3, 2, 5, 7, 2, 3, 8, 1, 4, 6]
        series = make_series(counts)
        for t in range(9, len(counts)):
            moved = counts[: t - 2] + [counts[t]]
            expected = c1_pvalue(make_series(moved), t - 2)
            assert c2_pvalue(series, t) == pytest.approx(expected, abs=1e-12)

    @given(window=counts_strategy, low=st.integers(0, 50), bump=st.integers(1, 20))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_current_count(self, window, low, bump):
        """A higher count in the current week never raises the p-value"""
        lead = [1, 0, 2, 1]
        lo_series = make_series(lead + window + [low])
        hi_series = make_series(lead + window + [low + bump])
        t = len(lead) + len(window)
        for fn in (c1_pvalue, c2_pvalue, c3_pvalue, bayes_pvalue, rki_pvalue):
            assert fn(hi_series, t) <= fn(lo_series, t) + 1e-12


class TestRunDetectors:
    """Whole-series runs and the p-value matrix"""

    def test_columns_match_single_week(self):
        counts = [3, 0, 1, 0, 1, 0, 1, 4, 4, 9, 8, 3, 2, 5, 1, 0, 2]
        series = make_series(counts)
        pm = run_detectors(series)
        singles = {"C1": c1_pvalue, "C2": c2_pvalue, "C3": c3_pvalue, "Bayes": bayes_pvalue, "RKI": rki_pvalue}
        for name, fn in singles.items():
            first = required_history(name)
            column = pm.column(name)
            assert np.isnan(column[:first]).all()
            assert not pm.defined_column(name)[:first].any()
            assert pm.defined_column(name)[first:].all()
            for t in range(first, len(counts)):
                assert column[t] == pytest.approx(fn(series, t), abs=1e-12)

    def test_values_in_unit_interval(self):
        counts = sample_baseline(flat_spec(phi=2.0), derive_stream(3, (0, 0, "baseline")), n_weeks=300).array
        pm = run_detectors(make_series(counts))
        values = pm.values[pm.defined]
        assert ((values >= 0) & (values <= 1)).all()

    def test_short_series_all_undefined(self):
        pm = run_detectors(make_series([1, 2, 3]))
        assert pm.values.shape == (3, 5)
        assert not pm.defined.any()

    def test_matrix_is_read_only(self):
        pm = run_detectors(make_series(list(range(12))))
        with pytest.raises(ValueError):
            pm.values[10, 0] = 0.5

    def test_frame_round_trip(self):
        pm = run_detectors(make_series([3, 0, 1, 4, 2, 7, 5, 1, 0, 9, 4, 4, 6]))
        frame = pm.to_frame(test_case=3, series=1)
        assert list(frame.columns) == ["test_case", "series", "week", "detector", "p_value", "defined"]
        assert len(frame) == 13 * 5
        assert PValueMatrix.from_frame(frame) == pm

    def test_false_alarm_rate_within_nominal(self):
        """Bayes and RKI alarm no more often than alpha on a Poisson(5) baseline"""
        counts = sample_baseline(flat_spec(), derive_stream(11, (0, 0, "baseline")), n_weeks=5000).array
        pm = run_detectors(make_series(counts), ["Bayes", "RKI"])
        for name in ("Bayes", "RKI"):
            p = pm.column(name)[pm.defined_column(name)]
            for alpha in (0.01, 0.05):
                se = math.sqrt(alpha * (1 - alpha) / p.size)
                assert np.mean(p <= alpha) <= alpha + 3 * se


# ============================================================================
# Illustrated Example
# ============================================================================


class TestIllustratedExample:
    """Weeks 30..42 of the stacking walk-through with m = 4"""

    @pytest.fixture
    def series(self):
        return make_series(ILLUSTRATED_COUNTS)

    @pytest.mark.parametrize("week,rki,bayes", [
        (36, 0.63, 0.43),
        (38, 0.14, 0.10),
        (39, 0.00, 0.00),
        (40, 0.13, 0.12),
    ])
    def test_replayed_pvalues(self, series, week, rki, bayes):
        assert round(rki_pvalue(series, week, m=4), 2) == rki
        assert round(bayes_pvalue(series, week, m=4), 2) == bayes

    def test_week_38_exact(self, series):
        # window 1,0,1,4 -> Poisson(2), c = 4
        assert rki_pvalue(series, 38, m=4) == pytest.approx(1 - math.exp(-2) * (1 + 2 + 2 + 4 / 3), rel=1e-9)
