"""Closed-form distributions, moments and asymptotics of the model.

Probability mass functions come in two flavours: scalar evaluators
(one probability per call) and table builders returning a ``Pmf`` whose
``truncation_tail_bound`` is a certified upper bound on the mass beyond
the truncation point (exact geometric bounds where available, Chernoff
bounds through the generating function or the subordinator otherwise).

The alternating binomial sum of the linear-rate law amplifies
cancellation roughly like 2**k, so rows beyond k = 12 are assembled in
multi-precision at exactly spaced arguments; k is capped (default 200)
and the cap surfaced as an error rather than silently losing digits.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import specfun
from .errors import ParameterError, PrecisionLossError, SeriesOverflowError
from .processes import Constant, CriticalBD, Linear, ModelParams, NonlinearDistinct
from .specfun import (
    DEFAULT_MAX_TERMS,
    PRABHAKAR_Z_BUDGET,
    gamma,
    gauss_2f1,
    mittag_leffler,
    prabhakar,
)

__all__ = [
    "Pmf",
    "tfpp_pmf",
    "tfpp_probability",
    "tfpp_mean",
    "tfpp_variance",
    "tfpp_pgf",
    "tfpp_interarrival_density",
    "yule_marginal_pmf",
    "genus_time_cdf",
    "genus_time_pdf",
    "inverse_stable_pdf",
    "inverse_stable_cdf",
    "fractional_pure_birth_pmf",
    "tn_pmf_nonlinear",
    "tn_pmf_linear",
    "tn_moments_linear",
    "tn_pmf_constant",
    "tn_asymptotic_constant",
    "critical_bd_pmf",
    "tn_pmf_critical",
    "tn_moments_critical",
    "tn_pmf_table",
    "LINEAR_K_LIMIT",
    "POSITIVE_ARG_CAP",
]

PMF_TOL = 1e-6
LINEAR_K_LIMIT = 200
POSITIVE_ARG_CAP = 30.0
_DEFAULT_K_CEILING = 200


@dataclass(frozen=True)
class Pmf:
    """Finite truncated probability mass function.

    ``probs[i]`` is the probability of ``support_start + i``;
    ``truncation_tail_bound`` is an upper bound on the mass that the
    truncated table does not cover (for empirical laws, the pooled
    leftover mass itself).
    """

    support_start: int
    probs: tuple
    truncation_tail_bound: float

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if self.support_start < 0:
            raise ParameterError("support_start must be non-negative")
        if any(p < -1e-9 or p > 1.0 + PMF_TOL for p in probs):
            raise ParameterError("probabilities must lie in [0, 1]")
        if not 0.0 <= self.truncation_tail_bound < math.inf:
            raise ParameterError("tail bound must be finite and non-negative")
        total = sum(probs)
        if total > 1.0 + PMF_TOL:
            raise ParameterError(f"probabilities sum to {total} > 1")
        if total + self.truncation_tail_bound < 1.0 - PMF_TOL:
            raise ParameterError(
                "mass plus tail bound falls short of 1; the bound is not valid"
            )

    def total(self) -> float:
        return sum(self.probs)

    def k_end(self) -> int:
        """Largest k covered by the table."""
        return self.support_start + len(self.probs) - 1


def _clamp(p: float, slack: float = 1e-12) -> float:
    if p < 0.0:
        if p < -slack:
            raise ParameterError(f"negative probability {p} beyond tolerance")
        return 0.0
    return p


# ---------------------------------------------------------------------------
# time-fractional Poisson marginal and related quantities
# ---------------------------------------------------------------------------


def _validate_tfpp(lam, alpha, t):
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")


def tfpp_probability(lam: float, alpha: float, t: float, k: int) -> float:
    """P(count = k) of the fractional Poisson marginal at time t."""
    _validate_tfpp(lam, alpha, t)
    if k < 0:
        raise ParameterError("k must be non-negative")
    if t == 0.0:
        return 1.0 if k == 0 else 0.0
    x = lam * t**alpha
    res = prabhakar(alpha, alpha * k + 1.0, k + 1.0, -x)
    log_pref = k * math.log(x)
    if abs(log_pref) < 600.0:
        return _clamp(x**k * res.value, slack=1e-9)
    if res.value <= 0.0:
        return 0.0
    return math.exp(log_pref + math.log(res.value))


def _tfpp_tail_bound(lam, alpha, t):
    """Certified bound on P(count > K) via the generating function.

    Markov's inequality on u**count gives P(count > K) <= G(u) / u**(K+1)
    for any u > 1, with G(u) = E_alpha(lam (u-1) t**alpha).
    """
    if t == 0.0:
        return lambda K: 0.0
    x = lam * t**alpha
    us, gs = [], []
    for u in (1.25, 1.5, 2.0, 4.0, 8.0):
        try:
            g = mittag_leffler(alpha, 1.0, x * (u - 1.0)).value
        except SeriesOverflowError:
            break
        us.append(u)
        gs.append(g)

    def tail(K: int) -> float:
        return min(
            g * math.exp(-(K + 1) * math.log(u)) for u, g in zip(us, gs)
        )

    return tail


def tfpp_pmf(
    lam: float,
    alpha: float,
    t: float,
    k_max: int | None = None,
    *,
    tail_tol: float = PMF_TOL,
    k_ceiling: int = 400,
) -> Pmf:
    """Truncated fractional Poisson marginal with certified tail bound.

    With ``k_max=None`` the table extends until the certified tail drops
    below ``tail_tol`` (or ``k_ceiling`` is hit, the bound being recorded
    either way).  alpha = 1 reproduces the Poisson law exactly.
    """
    _validate_tfpp(lam, alpha, t)
    tail_after = _tfpp_tail_bound(lam, alpha, t)
    K = k_max if k_max is not None else _resolve_k(tail_after, tail_tol, k_ceiling, 0)
    probs = [tfpp_probability(lam, alpha, t, k) for k in range(0, K + 1)]
    return Pmf(0, tuple(probs), tail_after(K))


def tfpp_mean(lam: float, alpha: float, t: float) -> float:
    """Mean lam * t**alpha / Gamma(alpha + 1); sublinear growth for alpha < 1."""
    _validate_tfpp(lam, alpha, t)
    return lam * t**alpha / math.gamma(alpha + 1.0)


def tfpp_variance(lam: float, alpha: float, t: float) -> float:
    """Variance; exceeds the mean for alpha < 1 (overdispersion)."""
    _validate_tfpp(lam, alpha, t)
    m = tfpp_mean(lam, alpha, t)
    x = lam * t**alpha
    return m + (x * x / alpha) * (
        1.0 / math.gamma(2.0 * alpha) - 1.0 / (alpha * math.gamma(alpha) ** 2)
    )


def tfpp_pgf(lam: float, alpha: float, t: float, u: float) -> float:
    """Probability generating function E_alpha(lam (u-1) t**alpha), |u| <= 1."""
    _validate_tfpp(lam, alpha, t)
    if not -1.0 <= u <= 1.0:
        raise ParameterError(f"u must be in [-1, 1], got {u}")
    return mittag_leffler(alpha, 1.0, lam * (u - 1.0) * t**alpha).value


def tfpp_interarrival_density(lam: float, alpha: float, t: float) -> float:
    """Renewal inter-arrival density lam t**(alpha-1) E_{alpha,alpha}(-lam t**alpha)."""
    _validate_tfpp(lam, alpha, t)
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    return lam * t ** (alpha - 1.0) * mittag_leffler(alpha, alpha, -lam * t**alpha).value


# ---------------------------------------------------------------------------
# classical Yule marginal and genus arrival law
# ---------------------------------------------------------------------------


def yule_marginal_pmf(
    lam: float,
    t: float,
    k_max: int | None = None,
    *,
    tail_tol: float = PMF_TOL,
    k_ceiling: int = 2000,
) -> Pmf:
    """Geometric marginal e**(-lam t) (1 - e**(-lam t))**k on k >= 0."""
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    p = math.exp(-lam * t)
    q = -math.expm1(-lam * t)

    def tail_after(K: int) -> float:
        return q ** (K + 1)

    K = k_max if k_max is not None else _resolve_k(tail_after, tail_tol, k_ceiling, 0)
    probs = tuple(p * q**k for k in range(0, K + 1))
    return Pmf(0, probs, tail_after(K))


def genus_time_cdf(nu: float, t: float, x: float) -> float:
    """Distribution function (x/t)**nu of the birth time of a random genus."""
    _validate_genus_time(nu, t, x)
    return (x / t) ** nu


def genus_time_pdf(nu: float, t: float, x: float) -> float:
    """Density nu x**(nu-1) / t**nu; diverges at 0 when nu < 1."""
    _validate_genus_time(nu, t, x)
    if x == 0.0:
        return nu / t if nu == 1.0 else math.inf
    return nu * x ** (nu - 1.0) / t**nu


def _validate_genus_time(nu, t, x):
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must be in (0, 1], got {nu}")
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    if not 0.0 <= x <= t:
        raise ParameterError(f"x must lie in [0, t], got {x}")


def inverse_stable_pdf(alpha: float, t: float, x: float) -> float:
    """Density t**(-alpha) phi(-alpha, 1-alpha; -x t**(-alpha)) of the
    inverse stable subordinator marginal at time t."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    if x < 0:
        raise ParameterError(f"x must be non-negative, got {x}")
    s = t ** (-alpha)
    return s * specfun.wright_phi(-alpha, 1.0 - alpha, -x * s).value


def inverse_stable_cdf(alpha: float, t: float, x: float) -> float:
    """Distribution function of the inverse stable subordinator marginal.

    Term-by-term integration of the density gives the closed form
    1 - phi(-alpha, 1; -x t**(-alpha))."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    if x < 0:
        raise ParameterError(f"x must be non-negative, got {x}")
    return 1.0 - specfun.wright_phi(-alpha, 1.0, -x * t ** (-alpha)).value


# ---------------------------------------------------------------------------
# species-count law of a randomly chosen genus
# ---------------------------------------------------------------------------


def _validate_tn(beta, nu, t):
    if not 0.0 < beta <= 1.0:
        raise ParameterError(f"beta must be in (0, 1], got {beta}")
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must be in (0, 1], got {nu}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")


def _ml_grid_mp(alpha, beta, base, mults, tol_digits, max_terms=DEFAULT_MAX_TERMS):
    """Mittag-Leffler values E_{alpha,beta}(-m * base) for each multiplier m,
    certified to the absolute tolerance 10**(-tol_digits), as (value, bound)
    mpf pairs.

    The arguments are formed as exact products inside the working
    precision: the alternating combinations taken downstream cancel to
    the 2**k level and would amplify any independent rounding of the
    argument grid catastrophically."""
    return [_ml_grid_single(alpha, beta, base, m, tol_digits, max_terms)
            for m in mults]


@functools.lru_cache(maxsize=8192)
def _ml_grid_single(alpha, beta, base, mult, tol_digits,
                    max_terms=DEFAULT_MAX_TERMS):
    """One high-precision value E_{alpha,beta}(-mult * base).

    alpha = 1 runs through the cancellation-free confluent form at modest
    precision; other exponents size the working precision from the
    largest series term (cancellation plus tolerance digits)."""
    z_est = -mult * base
    ln_tol = -tol_digits * math.log(10.0)
    with specfun._MP_LOCK:
        if z_est == 0.0:
            with mp.workdps(tol_digits + 15):
                return (mp.rgamma(beta), mp.mpf(0))
        if alpha == 1.0:
            dps = tol_digits + 15
        else:
            peak = specfun._poch_scan(alpha, beta, 1.0, z_est, ln_tol, max_terms)
            dps = int(max(peak, 0.0) / math.log(10.0)) + tol_digits + 10
        with mp.workdps(dps):
            tol = mp.mpf(10) ** (-tol_digits)
            z = -mp.mpf(mult) * mp.mpf(base)
            if alpha == 1.0:
                return _ml_alpha1_neg_mp(beta, z, tol, max_terms)
            S, tail, _, _ = specfun._poch_series_mp_core(
                alpha, beta, 1.0, z, tol, max_terms
            )
            return (S, tail)


def _ml_alpha1_neg_mp(beta, z, tol, max_terms):
    """E_{1,b}(z) for z < 0 inside an mp context, via the Kummer form."""
    x = mp.mpf(-z)
    ba = mp.mpf(beta)
    p = ba - 1
    S = mp.mpf(1)
    term = mp.mpf(1)
    tracker = specfun._GeomTail()
    for r in range(max_terms):
        term *= x * (p + r) / ((r + 1) * (ba + r))
        S += term
        tail = tracker.update(abs(term))
        if tail is not None and tail <= tol and abs(term) <= tol * abs(S):
            pref = mp.exp(z) * mp.rgamma(beta)
            return pref * S, pref * tail
    raise PrecisionLossError("confluent series did not converge in mp context")


def fractional_pure_birth_pmf(rates, beta: float, t: float, k: int) -> float:
    """Marginal P(population = k) of the time-changed nonlinear pure birth
    process with pairwise-distinct rates, via the partial-fraction form
    over E_beta(-rate_m t**beta)."""
    return _distinct_rate_sum(rates, beta, t, k, ml_beta2=1.0, prefactor_gamma=1.0)


def tn_pmf_nonlinear(rates, beta: float, nu: float, t: float, k: int) -> float:
    """P(species count of a random genus = k) for distinct nonlinear rates:
    Gamma(nu+1) prod_j rate_j  sum_m E_{beta,nu+1}(-rate_m t**beta) /
    prod_{l != m}(rate_l - rate_m)."""
    _validate_tn(beta, nu, t)
    return _distinct_rate_sum(
        rates, beta, t, k, ml_beta2=nu + 1.0, prefactor_gamma=math.gamma(nu + 1.0)
    )


def _distinct_rate_sum(rates, beta, t, k, *, ml_beta2, prefactor_gamma):
    rates = tuple(float(r) for r in rates)
    if len(set(rates)) != len(rates):
        raise ParameterError("rates must be pairwise distinct")
    if any(r <= 0 for r in rates):
        raise ParameterError("rates must be positive")
    if not isinstance(k, int) or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    if k > len(rates):
        raise ParameterError(
            f"k={k} exceeds the rate table of length {len(rates)}"
        )
    if not 0.0 < beta <= 1.0:
        raise ParameterError(f"beta must be in (0, 1], got {beta}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    if t == 0.0:
        return 1.0 if k == 1 else 0.0

    lam = rates[:k]
    base = t**beta
    denoms = [
        math.prod(lam[l] - lam[m] for l in range(k) if l != m) for m in range(k)
    ]

    digits = 20
    if k <= 25:
        try:
            mls = [
                mittag_leffler(beta, ml_beta2, -l * base, z_budget=math.inf).value
                for l in lam
            ]
        except PrecisionLossError:
            mls = None
        if mls is not None:
            total = math.fsum(ml / d for ml, d in zip(mls, denoms))
            amp = math.fsum(abs(ml / d) for ml, d in zip(mls, denoms))
            # term-scale to result ratio measures the cancellation
            cancel = amp / max(abs(total), amp * 1e-13)
            if cancel < 3e2:
                return _clamp(
                    prefactor_gamma * math.prod(lam[: k - 1]) * total,
                    slack=prefactor_gamma * amp * 1e-8,
                )
            digits = int(math.log10(cancel)) + 4

    for _ in range(3):
        tol_digits = digits + 25
        vals = _ml_grid_mp(beta, ml_beta2, base, lam, tol_digits)
        with specfun._MP_LOCK:
            with mp.workdps(30 + digits):
                tol = mp.mpf(10) ** (-tol_digits)
                # denominators rebuilt in working precision: their float
                # rounding would be amplified by the full cancellation
                rs = [mp.mpf(r) for r in lam]
                dmp = [
                    mp.fprod(rs[l] - rs[m] for l in range(k) if l != m)
                    for m in range(k)
                ]
                terms = [v / d for (v, _), d in zip(vals, dmp)]
                total = mp.fsum(terms)
                inv_denom = mp.fsum(1 / abs(d) for d in dmp)
                pref = mp.mpf(prefactor_gamma)
                for l in lam[: k - 1]:
                    pref *= mp.mpf(l)
                # ML truncation errors propagate through 1/denominators
                err = tol * inv_denom
                ok = total != 0 and err <= abs(total) * 1e-12
                need = int(mp.log10(inv_denom / max(abs(total), err))) + 2
                out = float(pref * total)
        if ok:
            return _clamp(out, slack=1e-9)
        digits = max(need, digits + 10)
    raise PrecisionLossError(
        "partial-fraction cancellation did not stabilize; rates too close"
    )


def tn_pmf_linear(
    lam: float,
    beta: float,
    nu: float,
    t: float,
    k: int,
    *,
    k_limit: int = LINEAR_K_LIMIT,
) -> float:
    """Linear-rate law: Gamma(nu+1) sum_j C(k-1, j-1) (-1)**(j-1)
    E_{beta,nu+1}(-lam j t**beta) for k >= 1.

    The alternating binomial sum is evaluated in multi-precision for
    k > 25; k beyond ``k_limit`` raises rather than losing digits.
    """
    row = _tn_linear_rows(lam, beta, nu, t, k, k, k_limit=k_limit)
    return row[0]


def _tn_linear_rows(lam, beta, nu, t, k_lo, k_hi, *, k_limit=LINEAR_K_LIMIT):
    return list(_tn_linear_rows_cached(lam, beta, nu, t, k_lo, k_hi, k_limit))


@functools.lru_cache(maxsize=64)
def _tn_linear_rows_cached(lam, beta, nu, t, k_lo, k_hi, k_limit):
    """Linear-rate probabilities for k in [k_lo, k_hi], sharing one
    Mittag-Leffler vector across rows."""
    _validate_tn(beta, nu, t)
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if not (isinstance(k_lo, int) and isinstance(k_hi, int)) or k_lo < 1 or k_hi < k_lo:
        raise ParameterError("need integer 1 <= k_lo <= k_hi")
    if k_hi > k_limit:
        raise PrecisionLossError(
            f"k={k_hi} beyond the linear-law ceiling {k_limit}; cancellation "
            "grows like 2**k and is not certified past it"
        )
    if t == 0.0:
        return tuple(1.0 if k == 1 else 0.0 for k in range(k_lo, k_hi + 1))

    g = math.gamma(nu + 1.0)
    base = lam * t**beta

    # 2**(k-1) amplification of the 1e-12 certified ML errors stays
    # below 1e-8 only for small k; multi-precision beyond
    if k_hi <= 12:
        mls = [
            mittag_leffler(beta, nu + 1.0, -j * base).value
            for j in range(1, k_hi + 1)
        ]
        out = []
        for k in range(k_lo, k_hi + 1):
            s = math.fsum(
                math.comb(k - 1, j - 1) * (mls[j - 1] if j % 2 else -mls[j - 1])
                for j in range(1, k + 1)
            )
            out.append(_clamp(g * s, slack=2.0**k * 1e-12))
        return tuple(out)

    # binomial weights amplify ML errors by at most 2**(k-1)
    digits = int(0.302 * (k_hi - 1)) + 1
    vals = _ml_grid_mp(
        beta, nu + 1.0, base, range(1, k_hi + 1), tol_digits=digits + 20
    )
    out = []
    with specfun._MP_LOCK:
        with mp.workdps(26 + digits + 10):
            gm = mp.mpf(g)
            for k in range(k_lo, k_hi + 1):
                s = mp.fsum(
                    mp.mpf(math.comb(k - 1, j - 1))
                    * (vals[j - 1][0] if j % 2 else -vals[j - 1][0])
                    for j in range(1, k + 1)
                )
                out.append(_clamp(float(gm * s), slack=1e-9))
    return tuple(out)


def tn_moments_linear(
    lam: float,
    beta: float,
    nu: float,
    t: float,
    *,
    growth_cap: float = POSITIVE_ARG_CAP,
):
    """(mean, second moment, variance) of the linear-rate species count:
    mean = Gamma(nu+1) E_{beta,nu+1}(lam t**beta), and so on.

    The Mittag-Leffler arguments are positive here and grow fast; the
    default cap keeps lam t**beta <= 30 and surfaces an error beyond.
    """
    _validate_tn(beta, nu, t)
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    x = lam * t**beta
    if x > growth_cap:
        raise SeriesOverflowError(
            f"lam * t**beta = {x} exceeds the growth cap {growth_cap}"
        )
    g = math.gamma(nu + 1.0)
    e1 = g * mittag_leffler(beta, nu + 1.0, x).value
    second = 2.0 * g * mittag_leffler(beta, nu + 1.0, 2.0 * x).value - e1
    return e1, second, second - e1 * e1


def tn_pmf_constant(
    lam: float,
    beta: float,
    nu: float,
    t: float,
    k: int,
    *,
    z_budget: float = PRABHAKAR_Z_BUDGET,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> float:
    """Constant-rate law Gamma(nu+1) lam**(k-1) t**(beta(k-1))
    E^k_{beta, beta k - beta + nu + 1}(-lam t**beta), k >= 1."""
    _validate_tn(beta, nu, t)
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if not isinstance(k, int) or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    if t == 0.0:
        return 1.0 if k == 1 else 0.0
    x = lam * t**beta
    res = prabhakar(
        beta,
        beta * (k - 1) + nu + 1.0,
        float(k),
        -x,
        z_budget=z_budget,
        max_terms=max_terms,
    )
    g = math.gamma(nu + 1.0)
    log_pref = (k - 1) * math.log(x)
    if abs(log_pref) < 600.0:
        return _clamp(g * x ** (k - 1) * res.value, slack=1e-9)
    if res.value <= 0.0:
        return 0.0
    return g * math.exp(log_pref + math.log(res.value))


def tn_asymptotic_constant(
    lam: float, beta: float, nu: float, t: float, k: int
) -> float:
    """Leading large-t term Gamma(nu+1) t**(-beta) / (lam Gamma(-beta k)).

    Diagnostic only: the sign follows Gamma(-beta k) and the returned
    value is negative whenever that Gamma is, so it cannot be used for
    normalization.  beta*k at an integer hits a Gamma pole and raises.
    """
    _validate_tn(beta, nu, t)
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if t <= 0:
        raise ParameterError(f"t must be positive, got {t}")
    if not isinstance(k, int) or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    return math.gamma(nu + 1.0) / lam * t ** (-beta) / gamma(-beta * k)


def critical_bd_pmf(lam: float, s: float, k: int) -> float:
    """Transient law of the critical birth-death process started at one:
    P(0) = lam s/(1+lam s), P(k) = (lam s)**(k-1)/(1+lam s)**(k+1), k >= 1."""
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if s < 0:
        raise ParameterError(f"s must be non-negative, got {s}")
    if not isinstance(k, int) or k < 0:
        raise ParameterError(f"k must be a non-negative integer, got {k}")
    ls = lam * s
    if k == 0:
        return ls / (1.0 + ls)
    if s == 0.0:
        return 1.0 if k == 1 else 0.0
    return math.exp((k - 1) * math.log(ls) - (k + 1) * math.log1p(ls))


def tn_pmf_critical(lam: float, nu: float, t: float, k: int) -> float:
    """Critical-model law of the species count of a random genus:
    k = 0: (lam t/(nu+1)) 2F1(1, 2; nu+2; -lam t);
    k >= 1: (lam t)**(k-1) Gamma(k) Gamma(nu+1)/Gamma(nu+k)
            2F1(k+1, k; nu+k; -lam t)."""
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must be in (0, 1], got {nu}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    if not isinstance(k, int) or k < 0:
        raise ParameterError(f"k must be a non-negative integer, got {k}")
    if t == 0.0:
        return 1.0 if k == 1 else 0.0
    x = lam * t
    if k == 0:
        return _clamp(x / (nu + 1.0) * gauss_2f1(1.0, 2.0, nu + 2.0, -x).value)
    f = gauss_2f1(k + 1.0, float(k), nu + k, -x).value
    log_pref = (
        (k - 1) * math.log(x)
        + math.lgamma(k)
        + math.lgamma(nu + 1.0)
        - math.lgamma(nu + k)
    )
    if f <= 0.0:
        return 0.0
    return math.exp(log_pref + math.log(f))


def tn_moments_critical(lam: float, nu: float, t: float):
    """(mean, second moment, variance) of the critical-model species count:
    the mean is 1 for every t, the variance 2 lam t/(nu+1)."""
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must be in (0, 1], got {nu}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    v = 2.0 * lam * t / (nu + 1.0)
    return 1.0, v + 1.0, v


# ---------------------------------------------------------------------------
# certified tail bounds and table assembly
# ---------------------------------------------------------------------------


def _resolve_k(tail_after, tail_tol, k_ceiling, support_start):
    for K in range(support_start, k_ceiling + 1):
        if tail_after(K) <= tail_tol:
            return K
    return k_ceiling


def _stable_passage_bound(beta, t, s):
    """Chernoff bound on P(inverse stable clock at t exceeds s)."""
    if beta == 1.0:
        return 0.0 if s >= t else 1.0
    return math.exp(
        -(1.0 - beta) * s * (s * beta / t) ** (beta / (1.0 - beta))
    )


def _split_grid(t):
    """Quarter-octave grid of clock-split points for Chernoff bounds."""
    return [t * 2.0 ** (j / 4.0) for j in range(-8, 45)]


def _tn_linear_tail(lam, beta, nu, t):
    if t == 0.0:
        return lambda K: 0.0
    if beta == 1.0:
        q = -math.expm1(-lam * t)

        def tail(K: int) -> float:
            # ages never exceed t, so the Yule passage bound applies as is
            return q**K

        return tail

    ss = _split_grid(t)
    chern = [_stable_passage_bound(beta, t, s) for s in ss]

    def tail(K: int) -> float:
        return min(
            c + (-math.expm1(-lam * s)) ** K for s, c in zip(ss, chern)
        )

    return tail


def _tn_constant_tail(lam, beta, nu, t):
    if t == 0.0:
        return lambda K: 0.0
    base = _tfpp_tail_bound(lam, beta, t)

    def tail(K: int) -> float:
        # the count is 1 + fractional Poisson count at age <= t
        return base(max(K - 1, 0))

    return tail


def _tn_critical_tail(lam, t):
    if t == 0.0:
        return lambda K: 0.0
    q = lam * t / (1.0 + lam * t)

    def tail(K: int) -> float:
        # P(= k) <= q**(k-1), summed beyond K
        return q**K / (1.0 - q)

    return tail


def _tn_nonlinear_tail(rates, beta, t):
    if t == 0.0:
        return lambda K: 0.0
    rates = np.asarray(tuple(rates))
    if beta == 1.0:
        ss = [t]
        chern_s = [0.0]
    else:
        ss = _split_grid(t)
        chern_s = [_stable_passage_bound(beta, t, s) for s in ss]
    us = [2.0 ** (j / 2.0) for j in range(0, 22)]
    # prefix sums of log(rate/(rate+u)) per u make each bound O(1)
    cums = {u: np.cumsum(np.log(rates / (rates + u))) for u in us}

    def passage(s: float, K: int) -> float:
        # P(K births within s) <= min_u exp(u s) prod_j rate_j/(rate_j+u)
        return min(
            math.exp(min(u * s + cums[u][K - 1], 0.0)) for u in us
        )

    def tail(K: int) -> float:
        K = min(K, len(rates))
        return min(c + passage(s, K) for s, c in zip(ss, chern_s))

    return tail


def tn_pmf_table(
    params: ModelParams,
    t: float,
    k_max: int | None = None,
    *,
    tail_tol: float = PMF_TOL,
    k_ceiling: int = _DEFAULT_K_CEILING,
) -> Pmf:
    """Truncated law of the species count of a random genus, with a
    certified truncation bound, dispatching on the species model."""
    model = params.species_rates
    if isinstance(model, CriticalBD):
        support = 0
        tail_after = _tn_critical_tail(model.lam, t)
        K = k_max if k_max is not None else _resolve_k(
            tail_after, tail_tol, k_ceiling, support
        )
        probs = [tn_pmf_critical(model.lam, params.nu, t, k) for k in range(0, K + 1)]
        return Pmf(0, tuple(probs), tail_after(K))

    support = 1
    if isinstance(model, Linear):
        tail_after = _tn_linear_tail(model.lam, params.beta, params.nu, t)
        K = k_max if k_max is not None else _resolve_k(
            tail_after, tail_tol, k_ceiling, support
        )
        if t == 0.0:
            probs = [1.0 if k == 1 else 0.0 for k in range(1, K + 1)]
        else:
            probs = _tn_linear_rows(
                model.lam, params.beta, params.nu, t, 1, K,
                k_limit=max(LINEAR_K_LIMIT, k_ceiling),
            )
        return Pmf(1, tuple(probs), tail_after(K))
    if isinstance(model, Constant):
        tail_after = _tn_constant_tail(model.lam, params.beta, params.nu, t)
        K = k_max if k_max is not None else _resolve_k(
            tail_after, tail_tol, k_ceiling, support
        )
        probs = [
            tn_pmf_constant(model.lam, params.beta, params.nu, t, k)
            for k in range(1, K + 1)
        ]
        return Pmf(1, tuple(probs), tail_after(K))
    if isinstance(model, NonlinearDistinct):
        tail_after = _tn_nonlinear_tail(model.rates, params.beta, t)
        ceiling = min(k_ceiling, len(model.rates))
        K = k_max if k_max is not None else _resolve_k(
            tail_after, tail_tol, ceiling, support
        )
        if K > len(model.rates):
            raise ParameterError("k_max exceeds the nonlinear rate table")
        probs = [
            tn_pmf_nonlinear(model.rates, params.beta, params.nu, t, k)
            for k in range(1, K + 1)
        ]
        return Pmf(1, tuple(probs), tail_after(K))
    raise ParameterError(f"unsupported species model: {model!r}")
