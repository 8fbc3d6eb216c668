"""Distributional tests for the process simulators.

Empirical laws at fixed seeds are compared against the closed forms
through total variation (pooled beyond the analytic table) or moment
windows of three standard errors.
"""

import math

import numpy as np
import pytest
from scipy import stats

from genyule import analytic
from genyule.errors import ParameterError, RateTableExhaustedError
from genyule.processes import (
    Constant,
    CriticalBD,
    Linear,
    ModelParams,
    NonlinearDistinct,
    SystemSnapshot,
    mean_genus_count,
    sample_tN,
    simulate_critical_bd_marginal,
    simulate_fractional_pure_birth_marginal,
    simulate_mpp_utt,
    simulate_pure_birth,
    simulate_system,
)
from genyule.samplers import RngStream

N = 100_000


def stream(i=0, seed=777001):
    return RngStream(seed, i)


def tv_against(samples, probs, support_start):
    """TV distance with empirical overflow pooled against the leftover mass."""
    probs = np.asarray(probs)
    width = len(probs)
    idx = np.minimum(np.asarray(samples) - support_start, width)
    assert (idx >= 0).all()
    counts = np.bincount(idx, minlength=width + 1)
    emp = counts / len(samples)
    return 0.5 * (
        np.abs(emp[:width] - probs).sum() + abs(emp[width] - (1.0 - probs.sum()))
    )


class TestModelParams:
    def test_validation(self):
        with pytest.raises(ParameterError):
            ModelParams(0.0, 0.5, 1.0, Linear(1.0))
        with pytest.raises(ParameterError):
            ModelParams(1.0, 1.5, 1.0, Linear(1.0))
        with pytest.raises(ParameterError):
            ModelParams(1.0, 0.5, 0.0, Linear(1.0))

    def test_critical_requires_classical_species_time(self):
        with pytest.raises(ParameterError):
            ModelParams(1.0, 0.5, 0.7, CriticalBD(1.0))
        ModelParams(1.0, 0.5, 1.0, CriticalBD(1.0))

    def test_nonlinear_distinct_rates(self):
        with pytest.raises(ParameterError):
            NonlinearDistinct((1.0, 1.0, 2.0))
        with pytest.raises(ParameterError):
            NonlinearDistinct((1.0, -2.0))
        assert NonlinearDistinct((3, 1, 2)).rates == (3.0, 1.0, 2.0)


class TestSystemSnapshot:
    def test_alignment_required(self):
        with pytest.raises(ParameterError):
            SystemSnapshot(1.0, (0.1, 0.2), (1,))
        with pytest.raises(ParameterError):
            SystemSnapshot(1.0, (0.2, 0.1), (1, 2))

    def test_dict_round_trip(self):
        snap = SystemSnapshot(2.0, (0.5, 1.0), (1, 3))
        assert SystemSnapshot.from_dict(snap.to_dict()) == snap


class TestPureBirth:
    def test_zero_duration(self):
        assert simulate_pure_birth(Linear(1.0), 0.0, stream()) == 1

    def test_linear_marginal_is_geometric(self):
        lam, t = 1.0, 1.0
        gen = stream().generator()
        samples = np.array(
            [simulate_pure_birth(Linear(lam), t, gen) for _ in range(30_000)]
        )
        p = math.exp(-lam * t)
        probs = [p * (1.0 - p) ** (k - 1) for k in range(1, 40)]
        assert tv_against(samples, probs, 1) < 0.01

    def test_constant_marginal_is_shifted_poisson(self):
        lam, t = 2.0, 1.5
        gen = stream().generator()
        x = np.array(
            [simulate_pure_birth(Constant(lam), t, gen) for _ in range(30_000)]
        )
        se = x.std(ddof=1) / math.sqrt(x.size)
        assert abs(x.mean() - (1.0 + lam * t)) < 3 * se

    def test_rate_table_exhaustion(self):
        with pytest.raises(RateTableExhaustedError):
            simulate_pure_birth(NonlinearDistinct((100.0, 200.0)), 50.0, stream())


class TestFractionalPureBirthMarginal:
    def params(self, model, beta=0.7, nu=0.5):
        return ModelParams(1.0, nu, beta, model)

    def test_zero_age(self):
        p = self.params(Linear(1.0))
        assert simulate_fractional_pure_birth_marginal(p, 0.0, stream()) == 1

    def test_critical_rejected(self):
        p = ModelParams(1.0, 0.5, 1.0, CriticalBD(1.0))
        with pytest.raises(ParameterError):
            simulate_fractional_pure_birth_marginal(p, 1.0, stream())

    def test_constant_matches_fractional_poisson(self):
        # count - 1 has the fractional Poisson marginal
        lam, beta, t = 1.0, 0.7, 1.0
        p = self.params(Constant(lam), beta=beta)
        x = simulate_fractional_pure_birth_marginal(p, t, stream(), size=N)
        ref = analytic.tfpp_pmf(lam, beta, t)
        assert tv_against(x - 1, np.array(ref.probs), 0) < 0.01

    def test_nonlinear_matches_partial_fraction_law(self):
        beta, t = 0.7, 1.0
        rates = tuple(float(j) for j in range(1, 201))
        p = self.params(NonlinearDistinct(rates), beta=beta)
        x = simulate_fractional_pure_birth_marginal(p, t, stream(), size=N)
        probs = [
            analytic.fractional_pure_birth_pmf(rates, beta, t, k)
            for k in range(1, 41)
        ]
        assert tv_against(x, np.array(probs), 1) < 0.01

    def test_linear_fast_path_matches_sequential(self):
        # the geometric marginal draw and the event-by-event simulation
        # are the same law
        lam, t = 1.0, 1.0
        p = ModelParams(1.0, 0.5, 1.0, Linear(lam))
        fast = simulate_fractional_pure_birth_marginal(p, t, stream(), size=30_000)
        gen = stream(1).generator()
        slow = np.array(
            [simulate_pure_birth(Linear(lam), t, gen) for _ in range(30_000)]
        )
        assert stats.ks_2samp(fast, slow).pvalue > 0.01


class TestCriticalBdMarginal:
    def test_zero_age(self):
        assert simulate_critical_bd_marginal(1.0, 0.0, stream()) == 1

    def test_extinction_probability(self):
        x = simulate_critical_bd_marginal(1.0, np.full(N, 1.0), stream())
        p0 = (x == 0).mean()
        assert abs(p0 - 0.5) < 3 * math.sqrt(0.25 / N)

    def test_mean_preserved(self):
        for age in (0.5, 2.0, 7.0):
            x = simulate_critical_bd_marginal(1.0, np.full(N, age), stream())
            se = x.std(ddof=1) / math.sqrt(N)
            assert abs(x.mean() - 1.0) < 3 * se

    def test_matches_transient_law(self):
        lam, age = 1.0, 2.0
        x = simulate_critical_bd_marginal(lam, np.full(N, age), stream())
        probs = [analytic.critical_bd_pmf(lam, age, k) for k in range(60)]
        assert tv_against(x, np.array(probs), 0) < 0.01


class TestMppUtt:
    def test_count_mean(self):
        params = ModelParams(2.0, 0.6, 1.0, Constant(1.0))
        t = 1.5
        gen = stream().generator()
        counts = np.array([simulate_mpp_utt(params, t, gen)[0] for _ in range(20_000)])
        se = counts.std(ddof=1) / math.sqrt(counts.size)
        assert abs(counts.mean() - mean_genus_count(params, t)) < 3 * se

    def test_marginal_matches_fractional_poisson(self):
        params = ModelParams(1.0, 0.7, 1.0, Constant(1.0))
        t = 1.0
        gen = stream().generator()
        counts = np.array([simulate_mpp_utt(params, t, gen)[0] for _ in range(N)])
        ref = analytic.tfpp_pmf(params.genus_intensity, params.nu, t)
        assert tv_against(counts, np.array(ref.probs), 0) < 0.01

    def test_yule_variant_marginal(self):
        lam, t = 1.0, 1.0
        params = ModelParams(lam, 1.0, 1.0, Constant(1.0))
        gen = stream().generator()
        counts = np.array(
            [simulate_mpp_utt(params, t, gen, variant="yule")[0] for _ in range(N)]
        )
        ref = analytic.yule_marginal_pmf(lam, t)
        assert tv_against(counts, np.array(ref.probs), 0) < 0.01

    def test_order_statistics_property(self):
        # pooled arrival times across realizations follow (x/t)^nu
        params = ModelParams(1.5, 0.5, 1.0, Constant(1.0))
        t = 2.0
        gen = stream().generator()
        times = []
        for _ in range(4000):
            _, ts = simulate_mpp_utt(params, t, gen)
            times.extend(ts)
        res = stats.kstest(np.asarray(times), lambda x: (x / t) ** params.nu)
        assert res.pvalue > 0.01

    def test_times_sorted_and_counted(self):
        params = ModelParams(3.0, 0.8, 1.0, Constant(1.0))
        count, times = simulate_mpp_utt(params, 2.0, stream())
        assert count == len(times)
        assert (np.diff(times) >= 0).all()


class TestSampleTN:
    def test_short_horizon_returns_one(self):
        params = ModelParams(1.0, 0.5, 1.0, Linear(1.0))
        x = sample_tN(params, 1e-9, stream(), size=5000)
        assert (x == 1).all()

    def test_linear_classical_matches_formula(self):
        # the Fig. 2-style configuration; mass beyond k = 48 pools into
        # the tail bin of the comparison
        params = ModelParams(1.0, 1.0, 1.0, Linear(1.0))
        t = 10.0
        x = sample_tN(params, t, stream(), size=N)
        ref = analytic.tn_pmf_table(params, t, k_max=48)
        assert tv_against(x, np.array(ref.probs), 1) < 0.01
        # classical-reduction shape: monotone decreasing with a heavy
        # right tail at large observation times
        probs = np.array(ref.probs)
        assert (np.diff(probs) < 0).all()
        assert probs[40] / probs[1] > (41.0 / 2.0) ** -4

    def test_critical_extinct_fraction(self):
        params = ModelParams(1.0, 0.5, 1.0, CriticalBD(1.0))
        t = 5.0
        x = sample_tN(params, t, stream(), size=N)
        p0 = analytic.tn_pmf_critical(1.0, 0.5, t, 0)
        assert abs((x == 0).mean() - p0) < 3 * math.sqrt(p0 * (1 - p0) / N)

    def test_constant_matches_prabhakar_formula(self):
        params = ModelParams(1.0, 0.5, 0.7, Constant(1.0))
        t = 2.0
        x = sample_tN(params, t, stream(), size=N)
        ref = analytic.tn_pmf_table(params, t)
        assert tv_against(x, np.array(ref.probs), 1) < 0.01

    def test_nonlinear_dispatch(self):
        rates = tuple(float(j) for j in range(1, 121))
        params = ModelParams(1.0, 0.5, 0.7, NonlinearDistinct(rates))
        x = sample_tN(params, 1.0, stream(), size=2000)
        assert (x >= 1).all()

    def test_nonlinear_vectorized_exhaustion(self):
        params = ModelParams(1.0, 0.5, 1.0, NonlinearDistinct((50.0, 80.0)))
        with pytest.raises(RateTableExhaustedError):
            simulate_fractional_pure_birth_marginal(params, 5.0, stream(), size=64)


class TestSimulateSystem:
    def test_empty_system_possible(self):
        params = ModelParams(0.05, 0.5, 1.0, Linear(1.0))
        empties = 0
        gen = stream().generator()
        for _ in range(200):
            snap = simulate_system(params, 1.0, gen)
            if len(snap.species_counts) == 0:
                empties += 1
        assert empties > 0

    def test_birth_models_keep_counts_positive(self):
        params = ModelParams(2.0, 0.7, 0.8, Linear(1.0))
        gen = stream().generator()
        for _ in range(100):
            snap = simulate_system(params, 2.0, gen)
            assert all(k >= 1 for k in snap.species_counts)
            assert all(0 <= x <= 2.0 for x in snap.genus_birth_times)

    def test_critical_counts_allow_extinction(self):
        params = ModelParams(3.0, 0.5, 1.0, CriticalBD(1.0))
        gen = stream().generator()
        seen_zero = False
        for _ in range(200):
            snap = simulate_system(params, 3.0, gen)
            if any(k == 0 for k in snap.species_counts):
                seen_zero = True
        assert seen_zero

    def test_total_species_mean_wald_identity(self):
        # E[total] = q(t) * E[species count of a random genus]
        params = ModelParams(1.0, 0.5, 1.0, Linear(1.0))
        t = 2.0
        gen = stream().generator()
        totals = np.array(
            [sum(simulate_system(params, t, gen).species_counts) for _ in range(20_000)]
        )
        expected = mean_genus_count(params, t) * analytic.tn_moments_linear(
            1.0, 1.0, 0.5, t
        )[0]
        se = totals.std(ddof=1) / math.sqrt(totals.size)
        assert abs(totals.mean() - expected) < 3 * se
