"""Tests for the Monte Carlo comparison harness."""

import math

import numpy as np
import pytest

from genyule.analytic import Pmf
from genyule.errors import ParameterError
from genyule.montecarlo import (
    ChiSquare,
    McConfig,
    Target,
    chi_square,
    convergence_sweep,
    ks_statistic,
    run_experiment,
    tv_distance,
)
from genyule.processes import Constant, CriticalBD, Linear, ModelParams
from genyule.samplers import RngStream, sample_poisson


def config(target, params=None, t=1.0, n=20_000, seed=31001, workers=1):
    if params is None:
        params = ModelParams(1.0, 0.7, 0.7, Constant(1.0))
    return McConfig(
        params=params, t=t, n_samples=n, seed=seed, target=target, workers=workers
    )


class TestTvDistance:
    def test_identical_is_zero(self):
        p = Pmf(0, (0.25, 0.75), 0.0)
        assert tv_distance(p, p) == 0.0

    def test_disjoint_point_masses(self):
        p = Pmf(0, (1.0,), 0.0)
        q = Pmf(1, (1.0,), 0.0)
        assert abs(tv_distance(p, q) - 1.0) < 1e-15

    def test_tail_slack_counted(self):
        p = Pmf(0, (0.9,), 0.1)
        q = Pmf(0, (0.9, 0.05), 0.05)
        assert abs(tv_distance(p, q) - 0.5 * (0.05 + 0.05)) < 1e-15


class TestKsStatistic:
    def test_exact_fit_small(self):
        x = np.linspace(0.01, 0.99, 99)
        assert ks_statistic(x, lambda v: v) < 0.02

    def test_total_mismatch(self):
        assert ks_statistic(np.full(10, 5.0), lambda v: 0.0) == 1.0


class TestChiSquare:
    def test_merges_small_bins(self):
        obs = [50, 30, 3, 2]
        exp = [48.0, 30.0, 4.0, 3.0]
        stat, dof, p = chi_square(obs, exp)
        assert dof == 2  # last two bins merged into one
        assert 0.0 <= p <= 1.0

    def test_calibration_under_null(self):
        # p-values under the null: no more than 2 of 20 seeds below 0.05
        pmf = [math.exp(-3.0) * 3.0**k / math.factorial(k) for k in range(12)]
        tail = 1.0 - sum(pmf)
        low = 0
        n = 20_000
        for seed in range(20):
            x = sample_poisson(3.0, RngStream(9000 + seed), size=n)
            counts = np.bincount(np.minimum(x, 12), minlength=13)
            expected = np.asarray(pmf + [tail]) * n
            _, _, p = chi_square(counts.tolist(), expected.tolist())
            if p < 0.05:
                low += 1
        assert low <= 2


class TestRunExperiment:
    def test_tfpp_marginal(self):
        rep = run_experiment(config(Target.TFPP_MARGINAL, n=100_000))
        assert rep.tv_distance < 0.01
        m = rep.sample_moments
        assert abs(m.mean - rep.analytic_mean) < 3 * m.mean_se

    def test_mpp_count_matches_fractional_poisson(self):
        rep = run_experiment(config(Target.MPP_COUNT, n=100_000))
        assert rep.tv_distance < 0.01

    def test_yule_example(self):
        params = ModelParams(1.0, 1.0, 1.0, Constant(1.0))
        rep = run_experiment(config(Target.YULE_EXAMPLE, params=params, n=100_000))
        assert rep.tv_distance < 0.01

    def test_tn_critical(self):
        params = ModelParams(1.0, 0.5, 1.0, CriticalBD(1.0))
        rep = run_experiment(config(Target.TN, params=params, t=5.0, n=50_000))
        assert rep.tv_distance < 0.015
        assert rep.analytic_mean == 1.0

    def test_critical_bd(self):
        params = ModelParams(1.0, 0.5, 1.0, CriticalBD(1.0))
        rep = run_experiment(config(Target.CRITICAL_BD, params=params, t=2.0, n=50_000))
        assert rep.tv_distance < 0.015

    def test_birth_times(self):
        params = ModelParams(2.0, 0.5, 1.0, Constant(1.0))
        rep = run_experiment(config(Target.BIRTH_TIMES, params=params, n=5_000))
        assert rep.ks_statistic < 0.02

    def test_ml_waiting(self):
        rep = run_experiment(config(Target.ML_WAITING, n=50_000))
        assert rep.ks_statistic < 0.01

    def test_inverse_stable(self):
        rep = run_experiment(config(Target.INVERSE_STABLE, n=20_000))
        assert rep.ks_statistic < 0.015

    def test_single_sample_degenerate(self):
        rep = run_experiment(config(Target.TFPP_MARGINAL, n=1))
        assert rep.empirical.total() + rep.empirical.truncation_tail_bound == 1.0

    def test_target_model_mismatch(self):
        params = ModelParams(1.0, 0.5, 1.0, Linear(1.0))
        with pytest.raises(ParameterError):
            run_experiment(config(Target.CRITICAL_BD, params=params))

    def test_chi_square_field(self):
        rep = run_experiment(config(Target.TFPP_MARGINAL, n=20_000))
        assert isinstance(rep.chi_square, ChiSquare)
        assert 0.0 <= rep.chi_square.p_value <= 1.0


class TestReproducibility:
    @pytest.mark.parametrize("workers", [1, 4])
    def test_byte_identical_reports(self, workers):
        a = run_experiment(config(Target.TFPP_MARGINAL, n=10_000, workers=workers))
        b = run_experiment(config(Target.TFPP_MARGINAL, n=10_000, workers=workers))
        assert a.to_json() == b.to_json()

    @pytest.mark.parametrize("workers", [1, 4])
    def test_thresholds_pass_across_worker_counts(self, workers):
        rep = run_experiment(
            config(Target.TFPP_MARGINAL, n=100_000, workers=workers)
        )
        assert rep.tv_distance < 0.01

    def test_worker_counts_change_stream_assignment_only(self):
        a = run_experiment(config(Target.TFPP_MARGINAL, n=50_000, workers=1))
        b = run_experiment(config(Target.TFPP_MARGINAL, n=50_000, workers=4))
        assert a.to_json() != b.to_json()
        assert abs(a.tv_distance - b.tv_distance) < 0.01


class TestConvergenceSweep:
    def test_decreasing_and_slope(self):
        cfg = config(Target.TFPP_MARGINAL, n=1)
        out = convergence_sweep(cfg, [1000, 10_000, 100_000])
        tvs = [tv for _, tv in out]
        assert tvs[0] > tvs[1] > tvs[2]
        logs_n = [math.log(n) for n, _ in out]
        logs_tv = [math.log(tv) for tv in tvs]
        slope = np.polyfit(logs_n, logs_tv, 1)[0]
        assert -0.7 <= slope <= -0.3

    def test_single_size(self):
        cfg = config(Target.TFPP_MARGINAL, n=1)
        out = convergence_sweep(cfg, [5000])
        assert len(out) == 1

    def test_deterministic(self):
        cfg = config(Target.TFPP_MARGINAL, n=1)
        assert convergence_sweep(cfg, [2000, 4000]) == convergence_sweep(
            cfg, [2000, 4000]
        )

    def test_requires_increasing_sizes(self):
        cfg = config(Target.TFPP_MARGINAL, n=1)
        with pytest.raises(ParameterError):
            convergence_sweep(cfg, [5000, 5000])

    def test_prefix_property(self):
        # a larger run reproduces the smaller run on its first samples
        small = run_experiment(config(Target.TFPP_MARGINAL, n=3000))
        prefix = run_experiment(config(Target.TFPP_MARGINAL, n=3000))
        assert small.to_json() == prefix.to_json()


class TestEmpiricalMeans:
    def test_means_within_three_se_of_analytic(self):
        import math as _m

        from genyule.processes import mean_genus_count

        checks = []
        params = ModelParams(1.0, 0.7, 0.7, Constant(1.0))
        rep = run_experiment(config(Target.MPP_COUNT, params=params, n=50_000))
        checks.append((rep, mean_genus_count(params, 1.0)))
        rep = run_experiment(config(Target.YULE_EXAMPLE, params=params, n=50_000))
        checks.append((rep, _m.expm1(1.0)))
        rep = run_experiment(
            config(
                Target.TN,
                params=ModelParams(1.0, 0.5, 1.0, CriticalBD(1.0)),
                t=3.0,
                n=50_000,
            )
        )
        checks.append((rep, 1.0))
        for rep, expected in checks:
            m = rep.sample_moments
            assert abs(m.mean - expected) < 3 * m.mean_se, rep.target


class TestMcConfigValidation:
    def test_bad_values(self):
        params = ModelParams(1.0, 0.5, 0.7, Constant(1.0))
        with pytest.raises(ParameterError):
            McConfig(params, 0.0, 100, 1, Target.TN)
        with pytest.raises(ParameterError):
            McConfig(params, 1.0, 0, 1, Target.TN)
        with pytest.raises(ParameterError):
            McConfig(params, 1.0, 100, 1, Target.TN, workers=0)

    def test_target_coercion(self):
        params = ModelParams(1.0, 0.5, 0.7, Constant(1.0))
        cfg = McConfig(params, 1.0, 100, 1, "TFPP_MARGINAL")
        assert cfg.target is Target.TFPP_MARGINAL
