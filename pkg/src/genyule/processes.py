"""Simulators for the two-layer macroevolution model.

Genera arrive by a mixed Poisson process run through a deterministic
time transformation (a unit-mean mixing variable W times the mean
function q); species of each genus grow by an independent birth process,
optionally slowed by an inverse-stable time change, or evolve as a
critical birth-death process when extinction is modelled.

All simulators are pure given (parameters, rng stream); their marginals
are exact draws, not discretizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterError, RateTableExhaustedError
from .samplers import (
    RngLike,
    as_generator,
    sample_genus_birth_time,
    sample_inverse_stable,
    sample_mixing_w,
    sample_uniform,
)

__all__ = [
    "Linear",
    "Constant",
    "NonlinearDistinct",
    "CriticalBD",
    "SpeciesModel",
    "ModelParams",
    "SystemSnapshot",
    "mean_genus_count",
    "simulate_pure_birth",
    "simulate_fractional_pure_birth_marginal",
    "simulate_critical_bd_marginal",
    "simulate_mpp_utt",
    "sample_tN",
    "simulate_system",
]


@dataclass(frozen=True)
class Linear:
    """Linear birth rates lambda_k = lam * k (classical Yule growth)."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ParameterError(f"rate must be positive, got {self.lam}")


@dataclass(frozen=True)
class Constant:
    """Constant birth rates lambda_k = lam for every population size."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ParameterError(f"rate must be positive, got {self.lam}")


@dataclass(frozen=True)
class NonlinearDistinct:
    """Explicit finite table of pairwise-distinct birth rates."""

    rates: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if not rates:
            raise ParameterError("rate table must be non-empty")
        if any(r <= 0 for r in rates):
            raise ParameterError("all rates must be positive")
        if len(set(rates)) != len(rates):
            raise ParameterError("rates must be pairwise distinct")


@dataclass(frozen=True)
class CriticalBD:
    """Critical linear birth-death with equal per-capita birth/death rate."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ParameterError(f"rate must be positive, got {self.lam}")


SpeciesModel = Union[Linear, Constant, NonlinearDistinct, CriticalBD]


@dataclass(frozen=True)
class ModelParams:
    """Scalar configuration of a generalized Yule model.

    genus_intensity scales the genus mean function
    q(t) = genus_intensity * t**nu / Gamma(1+nu); nu is the genus time
    exponent; beta the fractional exponent of species time.  The critical
    birth-death species model is non-fractional and requires beta = 1.
    """

    genus_intensity: float
    nu: float
    beta: float
    species_rates: SpeciesModel

    def __post_init__(self):
        if self.genus_intensity <= 0:
            raise ParameterError(
                f"genus_intensity must be positive, got {self.genus_intensity}"
            )
        if not 0.0 < self.nu <= 1.0:
            raise ParameterError(f"nu must be in (0, 1], got {self.nu}")
        if not 0.0 < self.beta <= 1.0:
            raise ParameterError(f"beta must be in (0, 1], got {self.beta}")
        if isinstance(self.species_rates, CriticalBD) and self.beta != 1.0:
            raise ParameterError(
                "the critical birth-death species model requires beta = 1"
            )


@dataclass(frozen=True)
class SystemSnapshot:
    """State of the whole system at observation time t.

    Birth times are sorted; species_counts[i] is the size of the genus
    born at genus_birth_times[i].  Pure-birth species models keep every
    count >= 1; under the critical model a count of 0 marks an extinct
    genus.
    """

    t: float
    genus_birth_times: tuple
    species_counts: tuple

    def __post_init__(self):
        if len(self.genus_birth_times) != len(self.species_counts):
            raise ParameterError("birth times and counts must align")
        times = self.genus_birth_times
        if any(times[i] > times[i + 1] for i in range(len(times) - 1)):
            raise ParameterError("genus birth times must be sorted")
        if any(k < 0 for k in self.species_counts):
            raise ParameterError("species counts must be non-negative")

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "t": self.t,
            "genus_birth_times": list(self.genus_birth_times),
            "species_counts": list(self.species_counts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSnapshot":
        return cls(
            t=float(d["t"]),
            genus_birth_times=tuple(float(x) for x in d["genus_birth_times"]),
            species_counts=tuple(int(k) for k in d["species_counts"]),
        )


def mean_genus_count(params: ModelParams, t: float) -> float:
    """Mean function q(t) = genus_intensity * t**nu / Gamma(1+nu)."""
    return params.genus_intensity * t**params.nu / math.gamma(1.0 + params.nu)


def _rate_at(model: SpeciesModel, k: int) -> float:
    """Birth rate when the population size is k (k >= 1)."""
    if isinstance(model, Linear):
        return model.lam * k
    if isinstance(model, Constant):
        return model.lam
    if isinstance(model, NonlinearDistinct):
        if k > len(model.rates):
            raise RateTableExhaustedError(
                f"population {k} exceeds the rate table of length {len(model.rates)}"
            )
        return model.rates[k - 1]
    raise ParameterError(f"not a pure-birth rate model: {model!r}")


def simulate_pure_birth(rates: SpeciesModel, duration: float, rng: RngLike) -> int:
    """Population of a classical pure birth process started at 1.

    Sequential exponential holding times with rates lambda_1, lambda_2, ...
    A NonlinearDistinct model raises RateTableExhaustedError if the
    population outgrows its table before `duration`.
    """
    if duration < 0:
        raise ParameterError(f"duration must be non-negative, got {duration}")
    gen = as_generator(rng)
    pop = 1
    elapsed = 0.0
    while True:
        elapsed += gen.standard_exponential() / _rate_at(rates, pop)
        if elapsed > duration:
            return pop
        pop += 1


def _pure_birth_marginal(rates: SpeciesModel, ages, gen: np.random.Generator):
    """Vector of exact population draws at the given ages.

    Linear and constant rates use the closed-form marginals of the
    classical processes (geometric, respectively shifted Poisson), which
    are equal in distribution to the sequential simulation; a nonlinear
    table falls back to event-by-event simulation.
    """
    ages = np.asarray(ages, dtype=float)
    if isinstance(rates, Linear):
        p = np.exp(-rates.lam * ages)
        out = np.ones(ages.shape, dtype=np.int64)
        grow = p < 1.0
        if grow.any():
            out[grow] = gen.geometric(p[grow])
        return out
    if isinstance(rates, Constant):
        return 1 + gen.poisson(rates.lam * ages)
    if isinstance(rates, NonlinearDistinct):
        # level sweep: one exponential batch per population size, samples
        # retire once their cumulative holding time passes their age
        flat = ages.ravel()
        out = np.ones(flat.shape, dtype=np.int64)
        elapsed = np.zeros(flat.shape)
        active = np.ones(flat.shape, dtype=bool)
        for k, rate in enumerate(rates.rates, start=1):
            elapsed = elapsed + gen.standard_exponential(flat.shape) / rate
            done = active & (elapsed > flat)
            out[done] = k
            active &= ~done
            if not active.any():
                break
        if active.any():
            raise RateTableExhaustedError(
                f"{int(active.sum())} path(s) outgrew the rate table of "
                f"length {len(rates.rates)}"
            )
        return out.reshape(ages.shape)
    raise ParameterError(f"not a pure-birth rate model: {rates!r}")


def simulate_fractional_pure_birth_marginal(
    params: ModelParams, age, rng: RngLike, size=None
):
    """Species count of one genus after `age` units of observation time.

    Runs the species clock through the inverse stable subordinator of
    exponent beta (bypassed exactly when beta = 1) and draws the pure
    birth population at the transformed age.
    """
    if isinstance(params.species_rates, CriticalBD):
        raise ParameterError("use simulate_critical_bd_marginal for CriticalBD")
    gen = as_generator(rng)
    scalar = size is None and np.ndim(age) == 0
    ages = np.atleast_1d(np.asarray(age, dtype=float))
    if size is not None:
        ages = np.broadcast_to(ages, (size,)).copy()
    if (ages < 0).any():
        raise ParameterError("age must be non-negative")
    if params.beta == 1.0:
        tau = ages
    else:
        tau = np.zeros_like(ages)
        pos = ages > 0
        if pos.any():
            tau[pos] = sample_inverse_stable(params.beta, ages[pos], gen)
    counts = _pure_birth_marginal(params.species_rates, tau, gen)
    return int(counts[0]) if scalar else counts


def simulate_critical_bd_marginal(lam: float, age, rng: RngLike, size=None):
    """Exact transient draw of a critical birth-death process started at 1.

    Inverse-CDF sampling from the classical transient law at time s:
    P(0) = lam*s/(1+lam*s) and P(k) = (lam*s)**(k-1)/(1+lam*s)**(k+1)
    for k >= 1 (geometric given survival).
    """
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    gen = as_generator(rng)
    scalar = size is None and np.ndim(age) == 0
    ages = np.atleast_1d(np.asarray(age, dtype=float))
    if size is not None:
        ages = np.broadcast_to(ages, (size,)).copy()
    if (ages < 0).any():
        raise ParameterError("age must be non-negative")
    ls = lam * ages
    p0 = ls / (1.0 + ls)
    u = gen.random(ages.shape)
    out = np.zeros(ages.shape, dtype=np.int64)
    alive = u >= p0
    if alive.any():
        # conditional on survival the size is geometric with ratio q
        q = p0[alive]
        v = (1.0 - u[alive]) / (1.0 - q)  # uniform on (0, 1]
        k = np.ones(v.shape, dtype=np.int64)
        pos = q > 0.0
        k[pos] = 1 + np.floor(np.log(v[pos]) / np.log(q[pos])).astype(np.int64)
        out[alive] = k
    return int(out[0]) if scalar else out


def _mixing_variable(params: ModelParams, gen, size, variant: str):
    if variant == "wright":
        if params.nu == 1.0:
            # classical case: the arrival process is plain Poisson
            return np.ones(size) if size is not None else 1.0
        return sample_mixing_w(params.nu, gen, size)
    if variant == "yule":
        return gen.standard_exponential(size)
    raise ParameterError(f"unknown mPp-utt variant: {variant!r}")


def _mpp_mean_function(params: ModelParams, t, variant: str):
    if variant == "wright":
        return mean_genus_count(params, t)
    return math.expm1(params.genus_intensity * t)


def _mpp_counts(params: ModelParams, t: float, gen, n: int, variant: str):
    """Vector of genus counts at time t (marginal only)."""
    w = _mixing_variable(params, gen, n, variant)
    return gen.poisson(w * _mpp_mean_function(params, t, variant))


def _mpp_times(params: ModelParams, t: float, gen, m: int, variant: str):
    """m iid birth times on [0, t] from the normalized mean function."""
    if m == 0:
        return np.empty(0)
    u = np.atleast_1d(sample_uniform(gen, m))
    if variant == "wright":
        return t * u ** (1.0 / params.nu)
    lam = params.genus_intensity
    return np.log1p(u * math.expm1(lam * t)) / lam


def simulate_mpp_utt(
    params: ModelParams, t: float, rng: RngLike, variant: str = "wright"
):
    """One realization of the genus arrival process on [0, t].

    Draws the mixing variable W, the count as Poisson(W q(t)), and,
    conditional on the count m, the m birth times as iid draws from
    F_t(x) = q(x)/q(t), returned sorted.  The default variant uses the
    power mean function q(t) = genus_intensity * t**nu / Gamma(1+nu) with
    the Wright-density mixing W; variant="yule" uses q(t) = e**(lam t) - 1
    with an exponential W, whose marginal is the classical geometric law.
    """
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    gen = as_generator(rng)
    count = int(_mpp_counts(params, t, gen, None, variant))
    times = np.sort(_mpp_times(params, t, gen, count, variant))
    return count, times


def sample_tN(params: ModelParams, t: float, rng: RngLike, size=None):
    """Species count of a genus chosen uniformly at random at time t.

    Conditions directly on the genus birth-time law F_t(x) = (x/t)**nu
    and ages the species process by t - T; the realized number of genera
    plays no role.
    """
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    gen = as_generator(rng)
    scalar = size is None
    n = 1 if scalar else size
    birth = np.atleast_1d(sample_genus_birth_time(params.nu, t, gen, n))
    ages = t - birth
    if isinstance(params.species_rates, CriticalBD):
        out = simulate_critical_bd_marginal(params.species_rates.lam, ages, gen)
    else:
        out = simulate_fractional_pure_birth_marginal(params, ages, gen)
    return int(out[0]) if scalar else out


def simulate_system(params: ModelParams, t: float, rng: RngLike) -> SystemSnapshot:
    """Full system draw: genus births plus one species count per genus."""
    gen = as_generator(rng)
    count, times = simulate_mpp_utt(params, t, gen)
    if count == 0:
        return SystemSnapshot(t=t, genus_birth_times=(), species_counts=())
    ages = t - times
    if isinstance(params.species_rates, CriticalBD):
        counts = simulate_critical_bd_marginal(params.species_rates.lam, ages, gen)
    else:
        counts = simulate_fractional_pure_birth_marginal(params, ages, gen)
    return SystemSnapshot(
        t=t,
        genus_birth_times=tuple(float(x) for x in times),
        species_counts=tuple(int(k) for k in counts),
    )
