"""Two-scale weights, the combined estimator, and the curvature tuner."""
import numpy as np
import pytest

from distnn import (
    Dataset,
    UsageError,
    default_weight_dim,
    dnn_weights,
    tune_scale,
    two_scale_estimate,
    two_scale_weight_vector,
    two_scale_weights,
)
from distnn.twoscale import _scan_second_differences

from conftest import random_dataset


class TestTwoScaleWeights:
    def test_dimension_three_constants(self):
        plan = two_scale_weights(10, 20, 3)
        assert plan.w1 == pytest.approx(-1.7024, abs=5e-5)
        assert plan.w2 == pytest.approx(2.7024, abs=5e-5)

    def test_dimension_ten_constants(self):
        plan = two_scale_weights(4, 8, 10)
        assert round(plan.w1, 2) == -6.73
        assert round(plan.w2, 2) == 7.73

    def test_hand_solved_system(self):
        """(s1=1, s2=4, d'=2): exponents 1 and 1/4 give (-1/3, 4/3)."""
        plan = two_scale_weights(1, 4, 2)
        assert plan.w1 == pytest.approx(-1 / 3, abs=1e-12)
        assert plan.w2 == pytest.approx(4 / 3, abs=1e-12)
        assert plan.w1 * 1.0 + plan.w2 * 0.25 == pytest.approx(0.0, abs=1e-12)

    def test_invariants_on_a_grid(self):
        """w2 is 1 - w1 by construction, the cancellation identity holds
        to rounding, and exactly one weight is negative."""
        for s1 in (1, 2, 5, 17):
            for s2 in (s1 + 1, 2 * s1, 5 * s1 + 3):
                for dim in (1, 2, 3, 7, 25):
                    plan = two_scale_weights(s1, s2, dim)
                    assert plan.w2 == 1.0 - plan.w1
                    scale = max(1.0, abs(plan.w1))
                    residual = (plan.w1 * s1 ** (-2 / dim)
                                + plan.w2 * s2 ** (-2 / dim))
                    assert abs(residual) <= 1e-12 * scale
                    assert min(plan.w1, plan.w2) < 0 < max(plan.w1, plan.w2)

    def test_singular_and_invalid_pairs(self):
        with pytest.raises(UsageError, match="singular"):
            two_scale_weights(5, 5, 3)
        with pytest.raises(UsageError):
            two_scale_weights(6, 5, 3)
        with pytest.raises(UsageError):
            two_scale_weights(0, 5, 3)
        with pytest.raises(UsageError):
            two_scale_weights(1, 2, 0)


class TestDefaultWeightDim:
    @pytest.mark.parametrize("d,expected", [(1, 1), (2, 2), (3, 3), (4, 3), (10, 3)])
    def test_compromise(self, d, expected):
        assert default_weight_dim(d) == expected

    def test_invalid(self):
        with pytest.raises(UsageError):
            default_weight_dim(0)


class TestCombinedWeightVector:
    def test_matches_per_scale_combination(self):
        w = two_scale_weight_vector(20, 4, 3)
        plan = two_scale_weights(4, 8, 3)
        expected = plan.w1 * dnn_weights(20, 4).w + plan.w2 * dnn_weights(20, 8).w
        np.testing.assert_array_equal(w, expected)

    @pytest.mark.parametrize("n,s,dim", [(10, 1, 1), (10, 5, 3), (41, 7, 2),
                                         (100, 50, 3)])
    def test_sums_to_one_with_negative_mass(self, n, s, dim):
        w = two_scale_weight_vector(n, s, dim)
        assert abs(w.sum() - 1.0) <= 1e-12
        assert w.min() < 0.0

    def test_pair_bounds(self):
        with pytest.raises(UsageError):
            two_scale_weight_vector(9, 5, 3)


class TestTwoScaleEstimate:
    def test_constant_responses_reproduced(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.normal(size=(30, 2)), np.full(30, 4.25))
        for s in (1, 5, 15):
            assert two_scale_estimate(data, [0.0, 0.0], s) == pytest.approx(
                4.25, abs=1e-12
            )

    def test_hand_combined_case(self, line_data):
        """Independent arithmetic: w1*(20/6) + w2*2 with d'=3 weights."""
        ratio = 2 ** (2 / 3)
        w1 = 1 / (1 - ratio)
        w2 = -ratio / (1 - ratio)
        expected = w1 * (20 / 6) + w2 * 2.0
        est = two_scale_estimate(line_data, [-1.0], 2, weight_dim=3)
        assert est == pytest.approx(expected, abs=1e-10)

    def test_pair_exceeding_sample(self, line_data):
        with pytest.raises(UsageError):
            two_scale_estimate(line_data, [-1.0], 3)


class TestScanRule:
    def test_worked_example(self):
        """Trace [10, 6, 5, 3]: second differences [-3, +1] flip at the
        second index, choosing scale 3."""
        chosen, hit_cap, used = _scan_second_differences(
            np.array([10.0, 6.0, 5.0, 3.0]), 4
        )
        assert (chosen, hit_cap, used) == (3, False, 4)

    def test_zero_second_difference_skipped(self):
        # deltas [4, 1, 1, 2] -> second diffs [-3, 0, +1]; the zero is
        # skipped and the flip lands at the third index.
        trace = np.array([10.0, 6.0, 5.0, 4.0, 6.0])
        chosen, hit_cap, used = _scan_second_differences(trace, 5)
        assert (chosen, hit_cap, used) == (4, False, 5)

    def test_convex_trace_hits_cap(self):
        trace = 1.0 / np.arange(1, 11)  # strictly convex decreasing
        chosen, hit_cap, used = _scan_second_differences(trace, 10)
        assert (chosen, hit_cap, used) == (10, True, 10)

    def test_flat_trace_hits_cap(self):
        chosen, hit_cap, _ = _scan_second_differences(np.full(8, 3.0), 8)
        assert (chosen, hit_cap) == (8, True)


class TestTuneScale:
    def _reference_scan(self, data, x, weight_dim, s_max):
        """Independent full-scan restatement of the stopping rule."""
        t = [two_scale_estimate(data, x, s, weight_dim) for s in range(1, s_max + 1)]
        baseline = 0
        for s in range(1, s_max - 1):
            second = abs(t[s + 1] - t[s]) - abs(t[s] - t[s - 1])
            sign = (second > 0) - (second < 0)
            if sign == 0:
                continue
            if baseline == 0:
                baseline = sign
                continue
            if sign != baseline:
                return s + 1, False
        return s_max, True

    def test_matches_reference_scan(self):
        rng = np.random.default_rng(42)
        X = rng.standard_normal((1000, 3))
        y = (X[:, 0] - 1) ** 2 + (X[:, 1] + 1) ** 3 - 3 * X[:, 2]
        y += rng.standard_normal(1000)
        data = Dataset(X, y)
        x = np.array([0.5, -0.5, 0.5])
        trace = tune_scale(data, x, s_max=60)
        chosen, hit_cap = self._reference_scan(data, x, 3, 60)
        assert trace.chosen_s == chosen
        assert trace.hit_cap == hit_cap

    def test_trace_is_consistent(self):
        rng = np.random.default_rng(9)
        data = random_dataset(rng, 80, 2)
        trace = tune_scale(data, np.zeros(2))
        assert trace.scales.tolist() == list(range(1, len(trace.estimates) + 1))
        np.testing.assert_allclose(
            trace.first_diffs, np.abs(np.diff(trace.estimates)), atol=0
        )
        np.testing.assert_allclose(
            trace.second_diffs, np.diff(trace.first_diffs), atol=0
        )
        assert 2 * trace.chosen_s <= data.n

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        data = random_dataset(rng, 120, 3)
        x = rng.normal(size=3)
        first = tune_scale(data, x)
        second = tune_scale(data, x)
        assert first.chosen_s == second.chosen_s
        np.testing.assert_array_equal(first.estimates, second.estimates)

    def test_flat_trace_hits_the_cap(self):
        # Zero responses make every estimate exactly 0.0, so no second
        # difference ever flips sign and the fallback branch engages.
        data = Dataset(np.arange(20.0)[:, None], np.zeros(20))
        trace = tune_scale(data, [0.0], s_max=10)
        assert trace.hit_cap
        assert trace.chosen_s == 10

    def test_too_small_sample(self):
        data = Dataset(np.arange(5.0)[:, None], np.arange(5.0))
        with pytest.raises(UsageError):
            tune_scale(data, [0.0])

    def test_cap_out_of_range(self):
        data = Dataset(np.arange(20.0)[:, None], np.arange(20.0))
        with pytest.raises(UsageError):
            tune_scale(data, [0.0], s_max=11)
