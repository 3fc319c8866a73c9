"""Unit tests for agreement statistics, Bland-Altman export, and Wilcoxon."""

import csv
import io
import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from camus_bench import (
    AgreementStats,
    WilcoxonResult,
    agreement,
    bland_altman,
    bland_altman_csv,
    wilcoxon_signed_rank,
)

from oracles import oracle_wilcoxon


class TestAgreement:
    def test_affine_relation_has_unit_correlation(self):
        ref = [1.0, 2.0, 3.0, 4.0, 5.0]
        user = [2.0 * r + 3.0 for r in ref]
        assert agreement(user, ref).corr == pytest.approx(1.0, abs=1e-12)
        flipped = [-r for r in ref]
        assert agreement(flipped, ref).corr == pytest.approx(-1.0, abs=1e-12)

    def test_constant_offset(self):
        ref = [10.0, 20.0, 30.0]
        user = [r + 5.0 for r in ref]
        stats = agreement(user, ref)
        assert stats.bias == 5.0
        assert stats.std == 0.0
        assert stats.mae == 5.0
        assert stats.loa_low == 5.0
        assert stats.loa_high == 5.0
        assert stats.corr == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed_example(self):
        stats = agreement([2.0, 4.0, 9.0], [1.0, 3.0, 5.0])
        assert stats.bias == 2.0
        assert stats.std == pytest.approx(math.sqrt(2.0), rel=1e-12)
        assert stats.mae == 2.0
        assert stats.corr == pytest.approx(14.0 / math.sqrt(208.0), rel=1e-12)
        assert stats.loa_low == pytest.approx(2.0 - 1.96 * math.sqrt(2.0), rel=1e-12)
        assert stats.loa_high == pytest.approx(2.0 + 1.96 * math.sqrt(2.0), rel=1e-12)

    def test_constant_series_yields_nan_corr_but_full_stats(self):
        stats = agreement([4.0, 4.0, 4.0], [1.0, 2.0, 3.0])
        assert math.isnan(stats.corr)
        assert stats.bias == 2.0
        assert stats.mae == 2.0
        assert stats.std == pytest.approx(math.sqrt(2.0 / 3.0), rel=1e-12)

    def test_single_pair_yields_nan_corr(self):
        stats = agreement([7.0], [3.0])
        assert math.isnan(stats.corr)
        assert stats.bias == 4.0

    def test_input_validation(self):
        with pytest.raises(ValueError):
            agreement([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            agreement([], [])
        with pytest.raises(ValueError):
            agreement([[1.0, 2.0]], [[1.0, 2.0]])

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=-100.0, max_value=100.0),
                st.floats(min_value=-100.0, max_value=100.0),
            ),
            min_size=3,
            max_size=30,
        )
    )
    def test_corr_matches_scipy_pearson(self, pairs):
        user = [u for u, _ in pairs]
        ref = [r for _, r in pairs]
        stats = agreement(user, ref)
        if len(set(user)) == 1 or len(set(ref)) == 1:
            assert math.isnan(stats.corr)
        elif np.ptp(user) < 1e-6 or np.ptp(ref) < 1e-6:
            # Near-constant input: the coefficient is numerically meaningless
            # catastrophic cancellation, so only require the [-1, 1] bound.
            assert abs(stats.corr) <= 1.0 + 1e-9
        else:
            expected = scipy.stats.pearsonr(user, ref).statistic
            assert stats.corr == pytest.approx(expected, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=-100.0, max_value=100.0),
                st.floats(min_value=-100.0, max_value=100.0),
            ),
            min_size=1,
            max_size=30,
        )
    )
    def test_mae_dominates_bias_and_loa_brackets_it(self, pairs):
        stats = agreement([u for u, _ in pairs], [r for _, r in pairs])
        assert stats.mae >= abs(stats.bias) - 1e-12
        assert stats.loa_low <= stats.bias <= stats.loa_high


class TestAgreementStatsValidation:
    def test_negative_spread_rejected(self):
        with pytest.raises(ValueError):
            AgreementStats(corr=0.0, bias=0.0, std=-1.0, mae=0.0,
                           loa_low=0.0, loa_high=0.0)
        with pytest.raises(ValueError):
            AgreementStats(corr=0.0, bias=0.0, std=0.0, mae=-1.0,
                           loa_low=0.0, loa_high=0.0)


class TestBlandAltman:
    def test_single_pair(self):
        pairs, stats = bland_altman([11.0], [7.0])
        assert pairs == [(9.0, 4.0)]
        assert stats.bias == 4.0

    def test_pairs_follow_input_order(self):
        pairs, _ = bland_altman([3.0, 1.0], [1.0, 3.0])
        assert pairs == [(2.0, 2.0), (2.0, -2.0)]

    def test_identical_series_has_zero_differences(self):
        values = [5.0, 6.0, 7.0]
        pairs, stats = bland_altman(values, values)
        assert all(diff == 0.0 for _, diff in pairs)
        assert stats.std == 0.0

    def test_mean_of_differences_equals_bias(self):
        user = [1.25, -2.5, 3.75, 10.0]
        ref = [0.5, 1.5, -4.0, 9.0]
        pairs, stats = bland_altman(user, ref)
        assert np.mean([d for _, d in pairs]) == pytest.approx(stats.bias, abs=1e-12)


class TestBlandAltmanCsv:
    def test_header_and_round_trip(self):
        pairs = [(9.0, 4.0), (0.1, -0.30000000000000004)]
        text = bland_altman_csv(pairs)
        assert "\r" not in text
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["mean", "difference"]
        parsed = [(float(m), float(d)) for m, d in rows[1:]]
        assert parsed == pairs

    def test_no_summary_rows(self):
        text = bland_altman_csv([(1.0, 2.0)] * 3)
        assert len(text.splitlines()) == 4


class TestWilcoxon:
    def test_identical_samples(self):
        result = wilcoxon_signed_rank([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.p_value == 1.0
        assert result.n_effective == 0
        assert result.w_plus == 0.0
        assert result.method == "exact"

    def test_five_positive_differences(self):
        result = wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0, 5.0], [0.0] * 5)
        assert result.w_plus == 15.0
        assert result.n_effective == 5
        assert result.p_value == 0.0625  # 2 of the 32 sign assignments
        assert result.method == "exact"

    def test_zero_differences_are_dropped(self):
        result = wilcoxon_signed_rank([1.0, 2.0, 3.0], [1.0, 2.0, 0.0])
        assert result.n_effective == 1
        assert result.w_plus == 1.0
        assert result.p_value == 1.0

    def test_mid_ranks_for_ties(self):
        result = wilcoxon_signed_rank([1.0, 1.0, 2.0, 2.0], [0.0] * 4)
        assert result.w_plus == 10.0
        assert result.p_value == 0.125

    def test_swapping_samples_preserves_p(self):
        x = [1.0, 4.0, 2.5, -1.0, 6.0]
        y = [0.5, 5.0, 2.0, 1.0, 3.0]
        forward = wilcoxon_signed_rank(x, y)
        backward = wilcoxon_signed_rank(y, x)
        assert forward.p_value == backward.p_value
        assert forward.w_plus + backward.w_plus == 15.0

    @settings(max_examples=150, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=-3, max_value=3),
                st.integers(min_value=-3, max_value=3),
            ),
            min_size=1,
            max_size=12,
        )
    )
    def test_exact_branch_matches_enumeration(self, pairs):
        # Small integer grids force zeros and ties; every intermediate
        # quantity is a multiple of 0.25, so equality is exact.
        x = [float(a) for a, _ in pairs]
        y = [float(b) for _, b in pairs]
        result = wilcoxon_signed_rank(x, y)
        p, w_plus, n_effective = oracle_wilcoxon(x, y)
        assert result.method == "exact"
        assert result.n_effective == n_effective
        assert result.w_plus == w_plus
        assert result.p_value == p

    def test_normal_branch_close_to_exact(self):
        rng = np.random.default_rng(7)
        x = rng.normal(0.3, 1.0, size=26).tolist()
        y = [0.0] * 26
        approx = wilcoxon_signed_rank(x, y)
        exact = wilcoxon_signed_rank(x, y, max_exact_n=26)
        assert approx.method == "normal-approximation"
        assert exact.method == "exact"
        assert approx.w_plus == exact.w_plus
        assert abs(approx.p_value - exact.p_value) <= 0.01

    def test_normal_branch_matches_scipy(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0.2, 1.0, size=30)
        x = x[x != 0.0]
        y = np.zeros_like(x)
        result = wilcoxon_signed_rank(x, y)
        expected = scipy.stats.wilcoxon(
            x, y, zero_method="wilcox", correction=True, mode="approx"
        )
        assert result.method == "normal-approximation"
        assert result.p_value == pytest.approx(expected.pvalue, abs=1e-12)

    def test_large_shift_is_significant(self):
        rng = np.random.default_rng(3)
        base = rng.normal(0.0, 1.0, size=40)
        shifted = base + 2.0
        assert wilcoxon_signed_rank(shifted, base).p_value < 1e-6


class TestWilcoxonResultValidation:
    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            WilcoxonResult(w_plus=0.0, n_effective=0, p_value=1.0, method="bootstrap")

    def test_w_plus_range_enforced(self):
        with pytest.raises(ValueError):
            WilcoxonResult(w_plus=7.0, n_effective=3, p_value=0.5, method="exact")

    def test_p_value_range_enforced(self):
        with pytest.raises(ValueError):
            WilcoxonResult(w_plus=1.0, n_effective=3, p_value=1.5, method="exact")
