"""Error-controlled special functions used by the model's closed forms.

Four entire-function families are evaluated by power series with a
certified absolute truncation bound:

* generalized Mittag-Leffler   E_{a,b}(z)    = sum_r z^r / Gamma(a r + b)
* Prabhakar (three-parameter)  E^g_{a,b}(z)  = sum_r (g)_r z^r / (r! Gamma(a r + b))
* Wright                       phi(a, b; z)  = sum_r z^r / (r! Gamma(a r + b))
* Gauss hypergeometric         2F1(a, b; c; z), restricted to c > b > 0, z <= 0

Series are summed until the next-term magnitude drops below ``tol`` times
the partial sum and a geometric-majorant tail bound drops below ``tol``
(relative to max(1, |value|)).  Negative arguments of large magnitude make
these series strongly alternating; the evaluator then switches to
multi-precision arithmetic sized from a scan of the largest term, and
refuses arguments beyond ``z_budget`` (cancellation grows roughly like
exp(|z|**(1/a)), so the practical domain shrinks as ``a`` decreases for
the Wright function and as ``a`` increases for Mittag-Leffler/Prabhakar).

All functions are pure; the multi-precision path serializes access to the
mpmath context with a lock, so concurrent invocation is safe.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import mpmath as mp
from scipy.special import rgamma as _rgamma

from .errors import (
    ConvergenceError,
    ParameterError,
    PoleError,
    PrecisionLossError,
    SeriesOverflowError,
)

__all__ = [
    "SeriesResult",
    "gamma",
    "mittag_leffler",
    "prabhakar",
    "wright_phi",
    "gauss_2f1",
    "DEFAULT_TOL",
    "DEFAULT_MAX_TERMS",
    "PRABHAKAR_Z_BUDGET",
    "WRIGHT_Z_BUDGET",
]

DEFAULT_TOL = 1e-12
DEFAULT_MAX_TERMS = 10_000

# |z| above which alternating series always run in multi-precision.
EXTENDED_PRECISION_THRESHOLD = 5.0

# Default |z| guards for the alternating regimes (overridable per call).
PRABHAKAR_Z_BUDGET = 50.0
WRIGHT_Z_BUDGET = 50.0

_LOG10 = math.log(10.0)
_EPS = 2.0 ** -52
_LOG_FLOAT_MAX = 700.0

# mpmath's precision is context-global; serialize the extended path.
_MP_LOCK = threading.Lock()


@dataclass(frozen=True)
class SeriesResult:
    """A series value together with a certified absolute error bound."""

    value: float
    abs_error_bound: float
    terms_used: int


def gamma(x: float) -> float:
    """Gamma function on the real line, signed on the negative axis."""
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(f"gamma has a pole at non-positive integer x={x}")
    return math.gamma(x)


class _GeomTail:
    """Tail bound for series whose term magnitudes eventually decay.

    After three consecutive magnitude decreases the remaining sum is
    bounded by ``mag * rho / (1 - rho)`` with ``rho`` the larger of the
    last observed ratio and ``rho_floor`` (the known limiting ratio,
    when there is one).  Works with floats and mpmath numbers.
    """

    def __init__(self, rho_floor=0.0):
        self.prev = None
        self.run = 0
        self.rho_floor = rho_floor

    def update(self, mag):
        if mag == 0:
            # vanishing Pochhammer coefficient: the series terminated
            self.prev = mag
            return 0
        ratio = None
        if self.prev is not None and self.prev > 0 and mag < self.prev:
            self.run += 1
            ratio = mag / self.prev
        else:
            self.run = 0
        self.prev = mag
        if ratio is None or self.run < 3:
            return None
        rho = ratio if ratio > self.rho_floor else self.rho_floor
        if rho >= 0.999999:
            return None
        return mag * rho / (1 - rho)


# ---------------------------------------------------------------------------
# Prabhakar / Mittag-Leffler series engine
# ---------------------------------------------------------------------------


def _poch_log_terms(alpha: float, beta: float, g: float, z: float):
    """Log-magnitude of the r-th Prabhakar series term as a callable."""
    lg_g = math.lgamma(g)
    la = math.log(abs(z))

    def log_term(r: int) -> float:
        return (
            math.lgamma(g + r)
            - lg_g
            + r * la
            - math.lgamma(r + 1)
            - math.lgamma(alpha * r + beta)
        )

    return log_term


def _poch_scan(alpha, beta, g, z, ln_tol, max_terms):
    """Largest log term and a feasibility check for the Prabhakar series.

    Fixed-sign series (z > 0) stop once terms are negligible relative to
    the peak; alternating series need terms below the absolute tolerance
    exp(ln_tol).
    """
    log_term = _poch_log_terms(alpha, beta, g, z)
    peak = -math.inf
    for r in range(max_terms):
        lt = log_term(r)
        if lt > peak:
            peak = lt
            continue
        stop = (peak + ln_tol - 5.0) if z > 0 else min(ln_tol - 5.0, peak - 5.0)
        if lt < stop:
            return peak
    raise ConvergenceError(
        f"series needs more than max_terms={max_terms} terms "
        f"(alpha={alpha}, beta={beta}, gamma={g}, z={z})"
    )


def _poch_series_float(alpha, beta, g, z, tol, max_terms):
    """Double-precision summation; returns None if the bound misses tol."""
    log_term = _poch_log_terms(alpha, beta, g, z)
    alternating = z < 0
    S = 0.0
    S_abs = 0.0
    round_acc = 0.0
    tracker = _GeomTail()
    for r in range(max_terms):
        lt = log_term(r)
        if lt > _LOG_FLOAT_MAX:
            return None
        mag = math.exp(lt)
        S += -mag if (alternating and r % 2 == 1) else mag
        S_abs += mag
        round_acc += mag * (abs(lt) + 4.0) * _EPS
        tail = tracker.update(mag)
        target = tol * max(1.0, abs(S))
        if tail is not None and tail <= 0.5 * target and mag <= target:
            bound = tail + round_acc + (r + 1) * _EPS * S_abs
            if bound <= tol * max(1.0, abs(S)):
                return S, bound, r + 1
            return None
        if tail is None and r + 1 == max_terms:
            return None
    return None


def _poch_series_mp_core(alpha, beta, g, z, tol, max_terms):
    """Prabhakar series inside an active mpmath precision context.

    Returns (value, tail_bound, abs_sum, terms) as mpmath numbers.
    """
    za = mp.mpf(z)
    al = mp.mpf(alpha)
    be = mp.mpf(beta)
    ga = mp.mpf(g)
    A = mp.mpf(1)  # (g)_r z^r / r!
    S = mp.mpf(0)
    S_abs = mp.mpf(0)
    tracker = _GeomTail()
    for r in range(max_terms):
        term = A * mp.rgamma(al * r + be)
        S += term
        mag = abs(term)
        S_abs += mag
        tail = tracker.update(mag)
        target = tol * max(1.0, abs(S))
        if tail is not None and tail <= 0.5 * target and mag <= target:
            return S, tail, S_abs, r + 1
        A *= za * (ga + r) / (r + 1)
    raise ConvergenceError(
        f"series did not converge within max_terms={max_terms} "
        f"(alpha={alpha}, beta={beta}, gamma={g}, z={z})"
    )


def _finish_mp(S, tail, S_abs, terms, dps) -> SeriesResult:
    """Convert an mp summation to a float SeriesResult with a sound bound."""
    value = float(S)
    if math.isinf(value):
        raise SeriesOverflowError("series value exceeds double-precision range")
    mp_round = S_abs * terms * mp.mpf(10) ** (2 - dps)
    bound = float(tail + mp_round) + abs(value) * 4.0 * _EPS
    return SeriesResult(value, bound, terms)


def _poch_series_mp(alpha, beta, g, z, tol, max_terms, dps):
    with _MP_LOCK:
        with mp.workdps(dps):
            S, tail, S_abs, terms = _poch_series_mp_core(
                alpha, beta, g, z, tol, max_terms
            )
            return _finish_mp(S, tail, S_abs, terms, dps)


def _prabhakar_alpha1(beta, g, z, tol, max_terms):
    """alpha = 1 case via the confluent hypergeometric representation.

    E^g_{1,b}(z) = 1F1(g; b; z) / Gamma(b); for z < 0 the Kummer
    transformation 1F1(g;b;z) = e^z 1F1(b-g;b;-z) removes the
    catastrophic cancellation (the transformed series has fixed-sign
    terms whenever b >= g, which covers every use in this package).
    """
    if z < 0.0:
        p, x = beta - g, -z
    else:
        p, x = g, z

    def run_float():
        S = 1.0
        S_abs = 1.0
        term = 1.0
        tracker = _GeomTail()
        for r in range(max_terms):
            term *= x * (p + r) / ((r + 1.0) * (beta + r))
            mag = abs(term)
            S += term
            S_abs += mag
            tail = tracker.update(mag)
            target = tol * max(1.0, abs(S))
            if tail is not None and tail <= 0.5 * target and mag <= target:
                return S, tail, S_abs, r + 2
            if not math.isfinite(S_abs):
                return None
        return None

    if x <= 600.0:
        out = run_float()
        if out is not None:
            S, tail, S_abs, terms = out
            pref = math.exp(z) * _rgamma(beta) if z < 0 else _rgamma(beta)
            value = pref * S
            rounding = abs(pref) * (
                (terms + abs(z) + 4.0) * _EPS * S_abs
            )
            bound = abs(pref) * tail + rounding + abs(value) * 4.0 * _EPS
            if bound <= tol * max(1.0, abs(value)):
                return SeriesResult(value, bound, terms)

    # Fixed-sign series: extra precision buys exponent range, not digits.
    dps = 36
    with _MP_LOCK:
        with mp.workdps(dps):
            xa = mp.mpf(x)
            pa = mp.mpf(p)
            ba = mp.mpf(beta)
            S = mp.mpf(1)
            S_abs = mp.mpf(1)
            term = mp.mpf(1)
            tracker = _GeomTail()
            terms = None
            for r in range(max_terms):
                term *= xa * (pa + r) / ((r + 1) * (ba + r))
                mag = abs(term)
                S += term
                S_abs += mag
                tail = tracker.update(mag)
                target = tol * max(1.0, abs(S))
                if tail is not None and tail <= 0.5 * target and mag <= target:
                    terms = r + 2
                    break
            if terms is None:
                raise ConvergenceError(
                    f"confluent series did not converge within {max_terms} terms"
                )
            pref = (mp.exp(z) if z < 0 else mp.mpf(1)) * mp.rgamma(beta)
            return _finish_mp(pref * S, abs(pref) * tail, abs(pref) * S_abs, terms, dps)


def _prabhakar_engine(alpha, beta, g, z, tol, max_terms, z_budget):
    if z == 0.0:
        v = float(_rgamma(beta))
        return SeriesResult(v, abs(v) * 2.0 * _EPS, 1)
    if alpha == 1.0:
        # the confluent (Kummer) form is cancellation-free: no |z| budget
        return _prabhakar_alpha1(beta, g, z, tol, max_terms)
    if z < 0.0 and abs(z) > z_budget:
        raise PrecisionLossError(
            f"|z|={abs(z)} exceeds the working-precision budget {z_budget}; "
            "raise z_budget explicitly to evaluate further out"
        )

    peak = _poch_scan(alpha, beta, g, z, math.log(tol), max_terms)
    if z > 0.0:
        if peak < _LOG_FLOAT_MAX:
            out = _poch_series_float(alpha, beta, g, z, tol, max_terms)
            if out is not None:
                return SeriesResult(*out)
        # Positive terms: extra digits only buy exponent range.
        return _poch_series_mp(alpha, beta, g, z, tol, max_terms, dps=36)

    if abs(z) <= EXTENDED_PRECISION_THRESHOLD and peak < 8.0:
        out = _poch_series_float(alpha, beta, g, z, tol, max_terms)
        if out is not None:
            return SeriesResult(*out)
    dps = max(32, int(max(peak, 0.0) / _LOG10) + int(-math.log10(tol)) + 10)
    return _poch_series_mp(alpha, beta, g, z, tol, max_terms, dps)


def mittag_leffler(
    alpha: float,
    beta: float,
    z: float,
    *,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    z_budget: float = PRABHAKAR_Z_BUDGET,
) -> SeriesResult:
    """Generalized Mittag-Leffler function E_{alpha,beta}(z).

    Requires alpha in (0, 1] and beta > 0.  For z <= 0 and beta >= alpha
    the value lies in [0, 1/Gamma(beta)].
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    if beta <= 0.0:
        raise ParameterError(f"beta must be positive, got {beta}")
    return _prabhakar_engine(alpha, beta, 1.0, z, tol, max_terms, z_budget)


def prabhakar(
    nu: float,
    beta: float,
    gamma: float,
    z: float,
    *,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    z_budget: float = PRABHAKAR_Z_BUDGET,
) -> SeriesResult:
    """Prabhakar function E^gamma_{nu,beta}(z).

    Requires nu in (0, 1], beta > 0, gamma > 0.  Reduces to
    ``mittag_leffler(nu, beta, z)`` when gamma is 1.
    """
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must be in (0, 1], got {nu}")
    if beta <= 0.0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if gamma <= 0.0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return _prabhakar_engine(nu, beta, gamma, z, tol, max_terms, z_budget)


# ---------------------------------------------------------------------------
# Wright function
# ---------------------------------------------------------------------------


def _wright_log_envelope(alpha: float, beta: float, z: float):
    """Upper bound on the log-magnitude of the r-th Wright term.

    For negative arguments of the reciprocal gamma the envelope
    |1/Gamma(x)| <= Gamma(1 - x) / pi absorbs the oscillating sine factor.
    """
    la = math.log(abs(z))
    log_pi = math.log(math.pi)

    def env(r: int) -> float:
        x = alpha * r + beta
        if x > 0.0:
            gpart = -math.lgamma(x)
        else:
            gpart = math.lgamma(1.0 - x) - log_pi
        return r * la - math.lgamma(r + 1) + gpart

    return env


def wright_phi(
    alpha: float,
    beta: float,
    z: float,
    *,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    z_budget: float = WRIGHT_Z_BUDGET,
) -> SeriesResult:
    """Wright function phi(alpha, beta; z) for alpha in (-1, 0) and z <= 0.

    The instance phi(-v, 1-v; -x) is the unit-time inverse stable
    subordinator density.  Cancellation grows like exp(c |z|**(1/(1+alpha)))
    so the reachable |z| shrinks as alpha approaches -1; the default
    budget is conservative and ``max_terms`` may bind first.
    """
    if not -1.0 < alpha < 0.0:
        raise ParameterError(f"alpha must be in (-1, 0), got {alpha}")
    if z > 0.0:
        raise ParameterError(f"z must be <= 0, got {z}")
    if abs(z) > z_budget:
        raise PrecisionLossError(
            f"|z|={abs(z)} exceeds the working-precision budget {z_budget}"
        )
    if z == 0.0:
        v = float(_rgamma(beta))
        return SeriesResult(v, abs(v) * 2.0 * _EPS, 1)

    env = _wright_log_envelope(alpha, beta, z)
    ln_stop = math.log(tol) - 5.0
    peak = -math.inf
    feasible = False
    for r in range(max_terms):
        le = env(r)
        if le > peak:
            peak = le
        elif le < ln_stop and le < peak - 5.0:
            feasible = True
            break
    if not feasible:
        raise ConvergenceError(
            f"Wright series needs more than max_terms={max_terms} terms "
            f"(alpha={alpha}, beta={beta}, z={z})"
        )

    if abs(z) <= EXTENDED_PRECISION_THRESHOLD and peak < 8.0:
        S = 0.0
        S_abs = 0.0
        round_acc = 0.0
        tracker = _GeomTail()
        coef = 1.0  # z^r / r!
        for r in range(max_terms):
            x = alpha * r + beta
            term = coef * float(_rgamma(x))
            menv = math.exp(env(r))
            S += term
            S_abs += menv
            round_acc += menv * 8.0 * _EPS
            tail = tracker.update(menv)
            target = tol * max(1.0, abs(S))
            if tail is not None and tail <= 0.5 * target and menv <= target:
                bound = tail + round_acc + (r + 1) * _EPS * S_abs
                if bound <= target:
                    return SeriesResult(S, bound, r + 1)
                break
            coef *= z / (r + 1.0)

    dps = max(32, int(max(peak, 0.0) / _LOG10) + int(-math.log10(tol)) + 10)
    with _MP_LOCK:
        with mp.workdps(dps):
            za = mp.mpf(z)
            al = mp.mpf(alpha)
            be = mp.mpf(beta)
            coef = mp.mpf(1)
            S = mp.mpf(0)
            S_abs = mp.mpf(0)
            tracker = _GeomTail()
            for r in range(max_terms):
                x = al * r + be
                term = coef * mp.rgamma(x)
                menv = abs(coef) * (
                    mp.rgamma(x) if x > 0 else mp.gamma(1 - x) / mp.pi
                )
                S += term
                S_abs += menv
                tail = tracker.update(menv)
                target = tol * max(1.0, abs(S))
                if tail is not None and tail <= 0.5 * target and menv <= target:
                    return _finish_mp(S, tail, S_abs, r + 1, dps)
                coef *= za / (r + 1)
    raise ConvergenceError(
        f"Wright series did not converge within max_terms={max_terms}"
    )


# ---------------------------------------------------------------------------
# Gauss hypergeometric
# ---------------------------------------------------------------------------


def gauss_2f1(
    a: float,
    b: float,
    c: float,
    z: float,
    *,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> SeriesResult:
    """Gauss hypergeometric 2F1(a, b; c; z) for c > b > 0 and z <= 0.

    For z < -1/2 the argument is mapped to w = z/(z-1) in (0, 1) by the
    Pfaff transformation; the variant is chosen so the transformed series
    carries the smaller of a and b, which keeps it convergent at w -> 1.
    """
    if not (c > b > 0.0):
        raise ParameterError(f"require c > b > 0, got b={b}, c={c}")
    if z > 0.0:
        raise ParameterError(f"z must be <= 0, got {z}")
    if z == 0.0:
        return SeriesResult(1.0, 2.0 * _EPS, 1)

    if z < -0.5:
        w = z / (z - 1.0)
        if a <= b:
            pre = (1.0 - z) ** (-a)
            p, q = a, c - b
        else:
            pre = (1.0 - z) ** (-b)
            p, q = b, c - a
        floor = w
    else:
        w = z
        pre = 1.0
        p, q = a, b
        floor = abs(z)

    def run(ctx_one, to_num):
        S = ctx_one
        S_abs = ctx_one
        term = ctx_one
        tracker = _GeomTail(rho_floor=floor)
        for r in range(max_terms):
            term = term * (p + r) * (q + r) * to_num(w) / ((c + r) * (r + 1))
            mag = abs(term)
            S = S + term
            S_abs = S_abs + mag
            tail = tracker.update(mag)
            target = tol * max(1.0, abs(S))
            if tail is not None and tail <= 0.5 * target and mag <= target:
                return S, tail, S_abs, r + 2
        return None

    out = run(1.0, float)
    if out is not None:
        S, tail, S_abs, terms = out
        value = pre * S
        bound = pre * (tail + terms * _EPS * S_abs * 4.0) + abs(value) * 4.0 * _EPS
        if bound <= tol * max(1.0, abs(value)):
            return SeriesResult(value, bound, terms)

    dps = max(40, int(-math.log10(tol)) + 25)
    with _MP_LOCK:
        with mp.workdps(dps):
            out = run(mp.mpf(1), mp.mpf)
            if out is None:
                raise ConvergenceError(
                    f"2F1 series did not converge within max_terms={max_terms} "
                    f"(a={a}, b={b}, c={c}, z={z})"
                )
            S, tail, S_abs, terms = out
            return _finish_mp(mp.mpf(pre) * S, mp.mpf(pre) * tail, S_abs, terms, dps)
