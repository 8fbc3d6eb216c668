"""Exact random-variate generators for the model's stochastic building blocks.

Streams are identified by a (seed, stream_id) pair fed as the key of a
counter-mode Philox generator: equal identifiers reproduce the same
variate sequence, distinct stream ids give statistically independent
streams, which is how parallel Monte Carlo work is partitioned.  Floating
point variates come from numpy Generator transforms, so reproducibility
is exact for a fixed numpy version.

Every sampler accepts either an ``RngStream`` (consumed from its origin)
or a live ``numpy.random.Generator`` (consumed statefully), plus an
optional ``size`` for vectorized draws.  A stream must never be shared
across concurrent workers; use distinct stream ids instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterError

__all__ = [
    "RngStream",
    "sample_uniform",
    "sample_exponential",
    "sample_poisson",
    "sample_stable_subordinator_unit",
    "sample_inverse_stable",
    "sample_mixing_w",
    "sample_ml_waiting_time",
    "sample_genus_birth_time",
]

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class RngStream:
    """Identity of a reproducible random stream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name, v in (("seed", self.seed), ("stream_id", self.stream_id)):
            if not 0 <= v <= _U64_MAX:
                raise ParameterError(f"{name} must fit in 64 unsigned bits, got {v}")

    def generator(self) -> np.random.Generator:
        """Materialize a fresh generator positioned at the stream origin."""
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ParameterError(f"rng must be an RngStream or numpy Generator, got {rng!r}")


def _scalar(x):
    return x if np.ndim(x) else float(x)


def sample_uniform(rng: RngLike, size=None):
    """Uniform draw from the open interval (0, 1)."""
    gen = as_generator(rng)
    if size is None:
        u = gen.random()
        while u == 0.0:
            u = gen.random()
        return u
    u = gen.random(size)
    bad = u == 0.0
    while bad.any():
        u[bad] = gen.random(int(bad.sum()))
        bad = u == 0.0
    return u


def sample_exponential(rate: float, rng: RngLike, size=None):
    """Exponential variate with the given rate."""
    if rate <= 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    return as_generator(rng).standard_exponential(size) / rate


def sample_poisson(mean, rng: RngLike, size=None):
    """Poisson variate; exact for all means."""
    if np.any(np.asarray(mean) < 0):
        raise ParameterError("Poisson mean must be non-negative")
    return as_generator(rng).poisson(mean, size)


def sample_stable_subordinator_unit(alpha: float, rng: RngLike, size=None):
    """Positive stable variate D with Laplace transform exp(-s**alpha).

    Uses the Kanter construction D = (A(U)/E)**((1-alpha)/alpha) with
    A(u) = sin(alpha*pi*u)**(alpha/(1-alpha)) * sin((1-alpha)*pi*u)
           / sin(pi*u)**(1/(1-alpha)),
    which is exact and rejection-free for alpha in (0, 1).
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    gen = as_generator(rng)
    u = sample_uniform(gen, size)
    e = gen.standard_exponential(size)
    a = (
        np.sin(alpha * np.pi * u) ** (alpha / (1.0 - alpha))
        * np.sin((1.0 - alpha) * np.pi * u)
        / np.sin(np.pi * u) ** (1.0 / (1.0 - alpha))
    )
    return _scalar((a / e) ** ((1.0 - alpha) / alpha))


def sample_inverse_stable(alpha: float, t, rng: RngLike, size=None):
    """Marginal of the inverse stable subordinator at time t.

    The first-passage time of the stable subordinator above level t is
    equal in distribution to (t / D)**alpha with D a unit positive stable
    variate; scaling in t is exactly t**alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise ParameterError("t must be positive")
    if t_arr.ndim > 0:
        # one variate per element of t
        if size is not None and size not in (t_arr.shape, t_arr.size):
            raise ParameterError("size conflicts with the shape of t")
        size = t_arr.shape
    d = sample_stable_subordinator_unit(alpha, rng, size)
    return _scalar((t / d) ** alpha)


def sample_mixing_w(nu: float, rng: RngLike, size=None):
    """Unit-mean mixing variable W of the power-law genus arrival process.

    W = Gamma(1+nu) * E where E is the unit-time inverse stable marginal
    of exponent nu; its density is phi(-nu, 1-nu; -w/Gamma(1+nu)) / Gamma(1+nu).
    """
    if not 0.0 < nu < 1.0:
        raise ParameterError(f"nu must be in (0, 1), got {nu}")
    return _scalar(math.gamma(1.0 + nu) * sample_inverse_stable(nu, 1.0, rng, size))


def sample_ml_waiting_time(alpha: float, lam: float, rng: RngLike, size=None):
    """Waiting time with Mittag-Leffler survival P(U > t) = E_alpha(-lam t**alpha).

    Product representation U = E**(1/alpha) * S / lam**(1/alpha) with E a
    unit exponential and S a unit positive stable variate; alpha = 1 is an
    exact exponential, not a limit.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    gen = as_generator(rng)
    if alpha == 1.0:
        return _scalar(gen.standard_exponential(size) / lam)
    e = gen.standard_exponential(size)
    s = sample_stable_subordinator_unit(alpha, gen, size)
    return _scalar(e ** (1.0 / alpha) * s / lam ** (1.0 / alpha))


def sample_genus_birth_time(nu: float, t: float, rng: RngLike, size=None):
    """Birth time of a uniformly chosen genus: inverse-CDF draw from (x/t)**nu."""
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must be in (0, 1], got {nu}")
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    u = sample_uniform(rng, size)
    return _scalar(t * u ** (1.0 / nu))
