"""Distributional tests for the exact samplers.

Statistical checks run on fixed seeds at n = 1e5 with 3-standard-error
windows or 1%-level KS/chi-square acceptance, so they are deterministic.
"""

import math

import numpy as np
import pytest
from scipy import stats

from genyule.errors import ParameterError
from genyule.samplers import (
    RngStream,
    sample_exponential,
    sample_genus_birth_time,
    sample_inverse_stable,
    sample_mixing_w,
    sample_ml_waiting_time,
    sample_poisson,
    sample_stable_subordinator_unit,
    sample_uniform,
)
from genyule import specfun

N = 100_000
KS_1PCT = 0.01  # acceptance level for KS p-values


def stream(i=0, seed=20240901):
    return RngStream(seed, i)


class TestRngStream:
    def test_reproducible(self):
        a = sample_uniform(stream(), size=64)
        b = sample_uniform(stream(), size=64)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = sample_uniform(stream(0), size=64)
        b = sample_uniform(stream(1), size=64)
        assert not np.array_equal(a, b)

    def test_generator_statefulness(self):
        gen = stream().generator()
        a = sample_uniform(gen, size=4)
        b = sample_uniform(gen, size=4)
        assert not np.array_equal(a, b)

    def test_validation(self):
        with pytest.raises(ParameterError):
            RngStream(-1)
        with pytest.raises(ParameterError):
            RngStream(0, 2**64)

    def test_substream(self):
        s = stream().substream(9)
        assert s.stream_id == 9 and s.seed == stream().seed


class TestStableSubordinator:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    def test_laplace_transform(self, alpha):
        d = sample_stable_subordinator_unit(alpha, stream(), size=N)
        for s in (0.5, 1.0, 2.0):
            obs = np.exp(-s * d)
            se = obs.std(ddof=1) / math.sqrt(N)
            assert abs(obs.mean() - math.exp(-(s**alpha))) < 3 * se

    def test_positivity(self):
        for alpha in (0.2, 0.5, 0.9):
            d = sample_stable_subordinator_unit(alpha, stream(), size=2000)
            assert (d > 0).all()

    def test_half_alpha_closed_form(self):
        # alpha = 1/2 has CDF erfc(1/(2 sqrt(x)))
        d = sample_stable_subordinator_unit(0.5, stream(), size=20_000)
        res = stats.kstest(d, lambda x: np.vectorize(math.erfc)(0.5 / np.sqrt(x)))
        assert res.pvalue > KS_1PCT

    def test_alpha_domain(self):
        for bad in (0.0, 1.0, 1.5):
            with pytest.raises(ParameterError):
                sample_stable_subordinator_unit(bad, stream())


class TestInverseStable:
    @pytest.mark.parametrize("alpha,t", [(0.5, 1.0), (0.7, 2.0), (0.4, 0.5)])
    def test_mean(self, alpha, t):
        e = sample_inverse_stable(alpha, t, stream(), size=N)
        se = e.std(ddof=1) / math.sqrt(N)
        assert abs(e.mean() - t**alpha / math.gamma(alpha + 1.0)) < 3 * se

    def test_half_alpha_density(self):
        # unit-time density exp(-x^2/4)/sqrt(pi), CDF erf(x/2)
        e = sample_inverse_stable(0.5, 1.0, stream(), size=20_000)
        res = stats.kstest(e, lambda x: np.vectorize(math.erf)(x / 2.0))
        assert res.pvalue > KS_1PCT

    def test_scaling_law(self):
        # samples at t equal t**alpha times samples at 1 in distribution
        alpha, t = 0.6, 3.0
        a = sample_inverse_stable(alpha, t, stream(0), size=20_000)
        b = t**alpha * sample_inverse_stable(alpha, 1.0, stream(1), size=20_000)
        assert stats.ks_2samp(a, b).pvalue > KS_1PCT

    def test_small_t_concentrates(self):
        lo = sample_inverse_stable(0.6, 0.01, stream(), size=5000)
        hi = sample_inverse_stable(0.6, 1.0, stream(1), size=5000)
        assert np.quantile(lo, 0.9) < np.quantile(hi, 0.1)

    def test_t_domain(self):
        with pytest.raises(ParameterError):
            sample_inverse_stable(0.5, 0.0, stream())


class TestMixingW:
    @pytest.mark.parametrize("nu", [0.3, 0.5, 0.8])
    def test_unit_mean(self, nu):
        w = sample_mixing_w(nu, stream(), size=N)
        se = w.std(ddof=1) / math.sqrt(N)
        assert abs(w.mean() - 1.0) < 3 * se

    def test_non_negative(self):
        w = sample_mixing_w(0.5, stream(), size=5000)
        assert (w >= 0).all()

    def test_histogram_against_density(self):
        # chi-square against the Wright mixing density on [0, 5]
        nu = 0.5
        w = sample_mixing_w(nu, stream(), size=N)
        g = math.gamma(1.0 + nu)
        edges = np.linspace(0.0, 5.0, 21)
        counts, _ = np.histogram(w, bins=edges)
        from scipy.integrate import quad

        def density(x):
            return specfun.wright_phi(-nu, 1.0 - nu, -x / g).value / g

        probs = [
            quad(density, a, b, limit=200)[0] for a, b in zip(edges, edges[1:])
        ]
        tail = 1.0 - sum(probs)
        obs = np.append(counts, N - counts.sum())
        exp = np.asarray(probs + [tail]) * N
        stat = ((obs - exp) ** 2 / exp).sum()
        p = stats.chi2.sf(stat, len(exp) - 1)
        assert p > KS_1PCT


class TestMlWaitingTime:
    def test_alpha_one_is_exponential(self):
        u = sample_ml_waiting_time(1.0, 2.0, stream(), size=20_000)
        res = stats.kstest(u, lambda x: -np.expm1(-2.0 * x))
        assert res.pvalue > KS_1PCT

    def test_alpha_one_reduction_is_exact(self):
        # the classical case bypasses the stable machinery entirely:
        # same stream, same draws as a plain exponential
        a = sample_ml_waiting_time(1.0, 2.0, stream(), size=16)
        b = stream().generator().standard_exponential(16) / 2.0
        assert np.array_equal(a, b)

    def test_survival_matches_mittag_leffler(self):
        u = sample_ml_waiting_time(0.7, 1.0, stream(), size=N)
        surv = specfun.mittag_leffler(0.7, 1.0, -1.0).value
        phat = (u > 1.0).mean()
        se = math.sqrt(surv * (1.0 - surv) / N)
        assert abs(phat - surv) < 3 * se

    def test_positive(self):
        u = sample_ml_waiting_time(0.6, 1.5, stream(), size=5000)
        assert (u > 0).all()

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            sample_ml_waiting_time(1.2, 1.0, stream())
        with pytest.raises(ParameterError):
            sample_ml_waiting_time(0.5, 0.0, stream())


class TestGenusBirthTime:
    def test_uniform_when_nu_one(self):
        x = sample_genus_birth_time(1.0, 2.0, stream(), size=20_000)
        res = stats.kstest(x, lambda v: v / 2.0)
        assert res.pvalue > KS_1PCT

    def test_sqrt_law_probability(self):
        # F_1(0.25) = sqrt(0.25) = 0.5
        x = sample_genus_birth_time(0.5, 1.0, stream(), size=N)
        phat = (x <= 0.25).mean()
        assert abs(phat - 0.5) < 3 * math.sqrt(0.25 / N)

    def test_support(self):
        x = sample_genus_birth_time(0.7, 3.0, stream(), size=5000)
        assert ((x >= 0) & (x <= 3.0)).all()


class TestPrimitives:
    def test_poisson_zero_mean(self):
        assert sample_poisson(0.0, stream()) == 0
        assert (sample_poisson(0.0, stream(), size=100) == 0).all()

    def test_exponential_mean(self):
        e = sample_exponential(1.0, stream(), size=N)
        se = e.std(ddof=1) / math.sqrt(N)
        assert abs(e.mean() - 1.0) < 3 * se

    def test_poisson_tv_against_pmf(self):
        k = sample_poisson(3.0, stream(), size=N)
        kmax = int(k.max())
        emp = np.bincount(k, minlength=kmax + 1) / N
        pmf = np.array(
            [math.exp(-3.0) * 3.0**j / math.factorial(j) for j in range(kmax + 1)]
        )
        tv = 0.5 * (np.abs(emp - pmf).sum() + (1.0 - pmf.sum()))
        assert tv < 0.01

    def test_uniform_open_interval(self):
        u = sample_uniform(stream(), size=5000)
        assert ((u > 0) & (u < 1)).all()

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            sample_exponential(-1.0, stream())
        with pytest.raises(ParameterError):
            sample_poisson(-0.5, stream())
