"""Simulation lab: data models, Monte Carlo runs, trade-off scans, CSV."""
import io

import numpy as np
import pytest

from distnn import GuardError, UsageError
from distnn.simlab import (
    write_metrics_csv,
    DgpSpec,
    LongRow,
    aggregate_rows,
    analytic_dgp,
    generate,
    make_spec,
    metrics_as_mapping,
    random_test_point,
    read_long_csv,
    run_monte_carlo,
    run_monte_carlo_rows,
    scan_estimates,
    tradeoff_scan,
    truth_at,
    write_long_csv,
)
from distnn.theory import validate_derivatives


class TestSpecs:
    def test_setting_one_mean_at_fixed_point(self):
        spec = make_spec(1)
        assert truth_at(spec, spec.fixed_point) == -1.125

    def test_setting_two_layout(self):
        spec = make_spec(2)
        assert spec.d == 10
        assert spec.fixed_point[[2, 4, 6]].tolist() == [0.5, -0.5, 0.5]
        assert truth_at(spec, spec.fixed_point) == -1.125
        assert spec.random_coords == (2, 4, 6)

    @pytest.mark.parametrize("setting,d,active", [(3, 10, 4), (4, 15, 7),
                                                  (7, 30, 14), (11, 50, 24)])
    def test_high_dimensional_fixed_points(self, setting, d, active):
        spec = make_spec(setting)
        assert spec.d == d
        assert np.all(spec.fixed_point[:active] == 0.5)
        assert np.all(spec.fixed_point[active:] == 0.0)
        assert spec.random_coords == tuple(range(active))

    def test_log_squared_sum_mean(self):
        spec = make_spec(3)
        x = np.zeros((1, 10))
        x[0, 0] = 1.0  # inner sum = 1^3 - 2 + 2 = 1, log(1) = 0
        assert spec.mean(x)[0] == pytest.approx(0.0, abs=1e-12)

    def test_unknown_setting(self):
        with pytest.raises(UsageError):
            make_spec(12)

    def test_wrong_dimension_rejected(self):
        spec = make_spec(1)
        with pytest.raises(UsageError, match="d=3"):
            DgpSpec(setting=1, d=4, n=100, noise_sd=1.0, mean=spec.mean,
                    fixed_point=np.zeros(4), random_coords=(0,))


class TestGenerate:
    def test_shapes_and_determinism(self):
        spec = make_spec(1, n=50)
        a = generate(spec, 7)
        b = generate(spec, 7)
        assert (a.n, a.d) == (50, 3)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.response, b.response)

    def test_zero_noise_reproduces_the_mean(self):
        spec = make_spec(1, n=40, noise_sd=0.0)
        data = generate(spec, 3)
        np.testing.assert_array_equal(data.response, spec.mean(data.features))

    def test_degenerate_draws_redrawn_with_warning(self):
        calls = {"count": 0}

        def sometimes_bad(X):
            calls["count"] += 1
            if calls["count"] == 1:
                return np.full(len(X), -np.inf)
            return X[:, 0]

        spec = DgpSpec(setting="custom", d=1, n=10, noise_sd=0.0,
                       mean=sometimes_bad, fixed_point=np.zeros(1),
                       random_coords=())
        with pytest.warns(RuntimeWarning, match="redrawn"):
            data = generate(spec, 0)
        assert np.all(np.isfinite(data.response))

    def test_always_degenerate_hits_guard(self):
        spec = DgpSpec(setting="custom", d=1, n=10, noise_sd=0.0,
                       mean=lambda X: np.full(len(X), np.nan),
                       fixed_point=np.zeros(1), random_coords=())
        with pytest.warns(RuntimeWarning):
            with pytest.raises(GuardError):
                generate(spec, 0)


class TestRandomTestPoint:
    def test_designated_coordinates_only(self):
        spec = make_spec(2)
        point = random_test_point(spec, np.random.default_rng(0))
        off = [j for j in range(10) if j not in (2, 4, 6)]
        assert np.all(point[off] == 0.0)
        assert np.all((point[[2, 4, 6]] >= 0) & (point[[2, 4, 6]] < 1))


class TestRunMonteCarlo:
    SPEC = make_spec(1, n=120)

    def test_bit_reproducible(self):
        kwargs = dict(reps=4, seed=11, boot_reps=10, s_max=20)
        a = run_monte_carlo(self.SPEC, "two-scale-dnn", **kwargs)
        b = run_monte_carlo(self.SPEC, "two-scale-dnn", **kwargs)
        assert a == b

    def test_mse_dominates_squared_bias(self):
        metrics = run_monte_carlo(self.SPEC, "two-scale-dnn", reps=6, seed=2,
                                  boot_reps=10, s_max=20)
        assert metrics.mse_fixed >= metrics.bias_fixed**2 - 1e-12
        assert metrics.mse_random >= metrics.bias_random**2 - 1e-12

    def test_forced_identical_replications_have_zero_variance(self, monkeypatch):
        child = np.random.SeedSequence(5).spawn(1)[0]

        class FixedSpawn:
            def __init__(self, seed):
                pass

            def spawn(self, n):
                return [child] * n

        monkeypatch.setattr(np.random, "SeedSequence", FixedSpawn)
        metrics = run_monte_carlo(self.SPEC, "dnn", s=10, reps=2, seed=5,
                                  boot_reps=5)
        assert metrics.mc_var_fixed == 0.0

    def test_family_parameter_validation(self):
        with pytest.raises(UsageError, match="explicit scale"):
            run_monte_carlo(self.SPEC, "dnn", reps=2, seed=0)
        with pytest.raises(UsageError, match="explicit"):
            run_monte_carlo(self.SPEC, "knn", reps=2, seed=0)
        with pytest.raises(UsageError, match="family"):
            run_monte_carlo(self.SPEC, "forest", reps=2, seed=0)
        with pytest.raises(UsageError, match="2\\*s"):
            run_monte_carlo(self.SPEC, "two-scale-dnn", s=100, reps=2, seed=0)

    def test_replication_failures_are_diagnosed(self):
        spec = DgpSpec(setting="custom", d=1, n=10, noise_sd=0.0,
                       mean=lambda X: np.full(len(X), np.nan),
                       fixed_point=np.zeros(1), random_coords=())
        with pytest.warns(RuntimeWarning):
            with pytest.raises(RuntimeError, match="replication 0"):
                run_monte_carlo(spec, "dnn", s=2, reps=2, seed=0)

    def test_long_rows_structure(self):
        metrics, rows = run_monte_carlo_rows(self.SPEC, "two-scale-dnn",
                                             reps=3, seed=7, boot_reps=5,
                                             s_max=20)
        assert len(rows) == 6
        kinds = [r.point_kind for r in rows]
        assert kinds == ["fixed", "random"] * 3
        fixed_est = [r.estimate for r in rows if r.point_kind == "fixed"]
        assert metrics.bias_fixed == pytest.approx(
            np.mean(fixed_est) - truth_at(self.SPEC, self.SPEC.fixed_point),
            abs=1e-12,
        )


class TestScans:
    SPEC = make_spec(1, n=100)

    def test_common_random_numbers_across_grid(self):
        wide = scan_estimates(self.SPEC, "dnn", [5, 10], reps=4, seed=3)
        narrow = scan_estimates(self.SPEC, "dnn", [5], reps=4, seed=3)
        np.testing.assert_allclose(wide[:, 0], narrow[:, 0], atol=1e-12)

    def test_grid_of_one_matches_monte_carlo_cell(self):
        curve = tradeoff_scan(self.SPEC, "dnn", [20], reps=5, seed=9)
        metrics = run_monte_carlo(self.SPEC, "dnn", s=20, reps=5, seed=9,
                                  boot_reps=5)
        assert curve.bias[0] == pytest.approx(metrics.bias_fixed, abs=1e-12)
        assert curve.mse[0] == pytest.approx(metrics.mse_fixed, abs=1e-12)

    def test_two_scale_grid_validation(self):
        with pytest.raises(UsageError, match="2\\*s"):
            scan_estimates(self.SPEC, "two-scale-dnn", [60], reps=2, seed=0)

    def test_grid_must_increase(self):
        with pytest.raises(UsageError, match="increasing"):
            scan_estimates(self.SPEC, "dnn", [5, 5], reps=2, seed=0)

    def test_knn_families_supported(self):
        grid = [1, 5, 20]
        uniform = scan_estimates(self.SPEC, "knn", grid, reps=3, seed=1)
        combined = scan_estimates(self.SPEC, "two-scale-knn", grid, reps=3, seed=1)
        assert uniform.shape == combined.shape == (3, 3)
        assert np.all(np.isfinite(uniform))
        assert np.all(np.isfinite(combined))


class TestAnalyticDgps:
    def test_derivatives_consistent(self):
        rng = np.random.default_rng(21)
        validate_derivatives(analytic_dgp(1), rng.normal(size=3))
        validate_derivatives(analytic_dgp(2), rng.normal(size=10))

    def test_means_match_spec_means(self):
        rng = np.random.default_rng(22)
        for setting in (1, 2):
            spec = make_spec(setting)
            dgp = analytic_dgp(setting)
            q = rng.normal(size=spec.d)
            assert dgp.mean(q) == pytest.approx(truth_at(spec, q), abs=1e-12)

    def test_unavailable_setting(self):
        with pytest.raises(UsageError):
            analytic_dgp(3)


class TestCsvInterfaces:
    def test_long_round_trip(self, tmp_path):
        rows = [
            LongRow("1", "two-scale-dnn", "fixed", 0, 7, 1.25, -1.125),
            LongRow("1", "two-scale-dnn", "random", 0, 8, 0.5, 0.25),
        ]
        path = tmp_path / "long.csv"
        with open(path, "w", encoding="utf-8") as fh:
            write_long_csv(rows, fh, header_comment="test run")
        assert read_long_csv(path) == rows

    def test_aggregate_rows_recovers_metrics(self):
        spec = make_spec(1, n=80)
        metrics, rows = run_monte_carlo_rows(spec, "two-scale-dnn", reps=5,
                                             seed=13, boot_reps=5, s_max=15)
        (setting, estimator, got), = aggregate_rows(rows)
        assert (setting, estimator) == ("1", "two-scale-dnn")
        expected = metrics_as_mapping(metrics)
        for key in ("bias_fixed", "mse_fixed", "var_fixed", "bias_random",
                    "mse_random"):
            assert got[key] == pytest.approx(expected[key], abs=1e-12)
        assert got["est_var_fixed"] is None

    def test_header_comment_written(self):
        buffer = io.StringIO()
        write_long_csv([], buffer, header_comment="echo line")
        lines = buffer.getvalue().splitlines()
        assert lines[0] == "# echo line"
        assert lines[1].startswith("setting,")

    def test_metrics_csv_formats_missing_values_empty(self):
        buffer = io.StringIO()
        mapping = {"bias_fixed": 0.5, "mse_fixed": 1.0, "var_fixed": 0.25,
                   "est_var_fixed": None, "bias_random": 0.0,
                   "mse_random": 2.0}
        write_metrics_csv([("1", "external", mapping)], buffer)
        lines = buffer.getvalue().splitlines()
        assert lines[0].startswith("setting,estimator,bias_fixed")
        assert lines[1] == "1,external,0.5,1.0,0.25,,0.0,2.0"
