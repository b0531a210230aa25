"""Analytic photon statistics for one detection interval.

An ion starts with collection rate ``r1``; at an exponentially distributed
time (rate ``rt``) it switches, once, to collection rate ``r2``.  For the
dark state this is background -> background + bright (bright pumping), for
the bright state the reverse (dark pumping).  The zero-photon probabilities
have closed forms; ``mixture_pmf`` evaluates the general count distribution
by adaptive quadrature and serves as an independent check of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError, UnsupportedConfiguration

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-16
SINGULAR_REL = 1e-6


@dataclass(frozen=True)
class MixtureSpec:
    r1: float
    r2: float
    rt: float
    t: float

    def __post_init__(self):
        if min(self.r1, self.r2, self.rt, self.t) < 0:
            raise DomainError("mixture rates and duration must be >= 0")


@dataclass(frozen=True)
class PrepErrors:
    """State-preparation infidelities.

    ``p_prep_dark``: probability a nominal |0> is actually |1> (imperfect pumping).
    ``p_prep_bright``: probability a nominal |1> is actually |0> (rotation error).
    """

    p_prep_dark: float = 1e-6
    p_prep_bright: float = 2e-4

    def __post_init__(self):
        for v in (self.p_prep_dark, self.p_prep_bright):
            if not 0.0 <= v <= 1.0:
                raise DomainError("preparation errors must lie in [0, 1]")


NO_PREP_ERRORS = PrepErrors(0.0, 0.0)


@dataclass(frozen=True)
class ErrorPoint:
    window: float
    dark_error: float
    bright_error: float
    avg_error: float
    avg_time: float


def poisson_pmf(n, mean):
    """Poisson probability of ``n`` counts, evaluated in log space."""
    n = np.asarray(n)
    mean = np.asarray(mean, dtype=float)
    if np.any(n < 0) or np.any(mean < 0):
        raise DomainError("poisson_pmf needs n >= 0 and mean >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = n * np.log(mean) - mean - gammaln(n + 1)
    out = np.where(mean == 0, np.where(n == 0, 1.0, 0.0), np.exp(logp))
    return float(out) if out.ndim == 0 else out


def state_mixture(rates, state, t):
    """MixtureSpec for an ion prepared in ``state`` ('dark' or 'bright')."""
    bright = rates.detected_bright + rates.r_bg
    if state == "dark":
        return MixtureSpec(r1=rates.r_bg, r2=bright, rt=rates.r_b, t=t)
    if state == "bright":
        return MixtureSpec(r1=bright, r2=rates.r_bg, rt=rates.r_d, t=t)
    raise DomainError(f"unknown state {state!r}")


def _breakpoints(spec):
    # the integrand varies on the scale 1/|r1 - r2| near either end of [0, t]
    dr = abs(spec.r1 - spec.r2) + spec.rt
    if dr == 0:
        return None
    pts = set()
    for k in (1.0, 5.0, 20.0, 60.0):
        for p in (k / dr, spec.t - k / dr):
            if 0 < p < spec.t:
                pts.add(p)
    return sorted(pts) or None


def mixture_pmf(n, spec):
    """Probability of ``n`` detected photons in ``[0, spec.t]``.

    Sum of the no-transition survival term ``exp(-rt t) * Pois(n; r1 t)`` and
    the integral over the transition time tau.  Inside the integral the sum
    over photons split before/after tau collapses to a single Poisson term of
    mean ``r1 tau + r2 (t - tau)``.
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    t, rt = spec.t, spec.rt
    survival = math.exp(-rt * t) * poisson_pmf(n, spec.r1 * t)
    if rt == 0 or t == 0:
        return survival

    def integrand(tau):
        mean = spec.r1 * tau + spec.r2 * (t - tau)
        return rt * math.exp(-rt * tau) * poisson_pmf(n, mean)

    val, err, info = integrate.quad(integrand, 0.0, t, epsabs=QUAD_EPSABS,
                                    epsrel=QUAD_EPSREL, points=_breakpoints(spec),
                                    limit=500, full_output=1)[:3]
    if err > max(QUAD_EPSABS, QUAD_EPSREL * abs(val)) * 1e3:
        raise ConvergenceError("mixture_pmf quadrature did not converge",
                               {"n": n, "spec": spec, "value": val, "abserr": err,
                                "neval": info["neval"]})
    return min(1.0, max(0.0, survival + val))


def p_zero_dark(t, rates):
    """Probability of detecting no photon in ``[0, t]`` from a prepared |0>."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    a, rb, rbg = rates.detected_bright, rates.r_b, rates.r_bg
    # (e^{-R_b t} - e^{-a t}) / (a - R_b) = e^{-min t} (1 - e^{-|d| t}) / |d|
    d = abs(a - rb)
    slow = min(a, rb)
    if d < SINGULAR_REL * max(a, rb) or d == 0:
        frac = t - d * t ** 2 / 2.0 + d ** 2 * t ** 3 / 6.0
    else:
        frac = -np.expm1(-d * t) / d
    p = rb * np.exp(-(slow + rbg) * t) * frac + np.exp(-(rb + rbg) * t)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def p_zero_bright(t, rates):
    """Probability of detecting no photon in ``[0, t]`` from a prepared |1>."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    a, rd, rbg = rates.detected_bright, rates.r_d, rates.r_bg
    s = a + rd
    frac = -np.expm1(-s * t) / s if s > 0 else np.zeros_like(t)
    p = rd * np.exp(-rbg * t) * frac + np.exp(-(rd + a + rbg) * t)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def observed_errors(window, rates, prep):
    """(dark_error, bright_error) for a threshold-0 rule at ``window``."""
    pd0 = p_zero_dark(window, rates)
    pb0 = p_zero_bright(window, rates)
    dark = (1 - prep.p_prep_dark) * (1 - pd0) + prep.p_prep_dark * (1 - pb0)
    bright = (1 - prep.p_prep_bright) * pb0 + prep.p_prep_bright * pd0
    return dark, bright


def _survival_integral(fn, rates, window):
    if window == 0:
        return 0.0
    scales = [r for r in (rates.detected_bright + rates.r_bg + rates.r_d, rates.r_b)
              if r > 0]
    pts = sorted({k / r for r in scales for k in (1.0, 5.0, 20.0) if 0 < k / r < window})
    val, _ = integrate.quad(lambda t: fn(t, rates), 0.0, window, epsabs=QUAD_EPSABS,
                            epsrel=QUAD_EPSREL, points=pts or None, limit=500)
    return val


def stop_time_by_state(rates, window):
    """Expected first-photon stop time for each prepared state."""
    if window < 0:
        raise DomainError("window must be >= 0")
    return {"dark": _survival_integral(p_zero_dark, rates, window),
            "bright": _survival_integral(p_zero_bright, rates, window)}


def avg_stop_time(rates, window, prior_bright=0.5):
    """Mean detection time when detection stops at the first photon.

    E[min(T_first, window)] is the integral of the zero-photon probability
    over ``[0, window]``; the two states are weighted by ``prior_bright``.
    """
    if not 0.0 <= prior_bright <= 1.0:
        raise DomainError("prior_bright must lie in [0, 1]")
    times = stop_time_by_state(rates, window)
    return (1 - prior_bright) * times["dark"] + prior_bright * times["bright"]


def error_point(rates, prep, window, prior_bright=0.5):
    dark, bright = observed_errors(window, rates, prep)
    return ErrorPoint(window=float(window), dark_error=float(dark),
                      bright_error=float(bright),
                      avg_error=float((1 - prior_bright) * dark + prior_bright * bright),
                      avg_time=avg_stop_time(rates, window, prior_bright))


def error_curve(rates, prep, windows, prior_bright=0.5):
    """Threshold-0 detection errors and first-photon mean stop times per window."""
    windows = [float(w) for w in windows]
    if any(b < a for a, b in zip(windows, windows[1:])):
        raise DomainError("windows must be sorted ascending")
    return [error_point(rates, prep, w, prior_bright) for w in windows]


def fidelity_at_avg_time(rates, prep, target_avg_time, prior_bright=0.5, tol=1e-9):
    """Window whose mean first-photon stop time equals ``target_avg_time``.

    Returns ``(window, avg_error)``.  The window is found by bisection to
    ``tol`` seconds.
    """
    if target_avg_time < 0:
        raise DomainError("target average time below the minimum achievable (0)")

    def f(w):
        return avg_stop_time(rates, w, prior_bright) - target_avg_time

    lo, hi = 0.0, max(target_avg_time, 1e-9)
    while f(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e4:
            raise DomainError("target average time is not reachable with these rates")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    window = 0.5 * (lo + hi)
    return window, error_point(rates, prep, window, prior_bright).avg_error


def minimize_avg_error(rates, prep, prior_bright=0.5, bounds=(1e-7, 1e-2)):
    """ErrorPoint at the window minimising the threshold-0 average error."""
    if rates.detected_bright == 0:
        raise UnsupportedConfiguration("no bright signal: average error is flat in the window")

    def objective(logw):
        d, b = observed_errors(10.0 ** logw, rates, prep)
        return (1 - prior_bright) * d + prior_bright * b

    lo, hi = math.log10(bounds[0]), math.log10(bounds[1])
    grid = np.linspace(lo, hi, 201)
    k = int(np.argmin([objective(x) for x in grid]))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(objective, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-10})
    return error_point(rates, prep, 10.0 ** res.x, prior_bright)


def zero_background_limit(rates, prep, prior_bright=0.5):
    """Best average fidelity with background removed, under two conventions.

    ``with_prep`` keeps the state-preparation leakage in the averaged error;
    ``intrinsic`` counts only the photon-statistics errors.
    """
    clean = rates.with_background(0.0)
    out = {}
    for name, p in (("with_prep", prep), ("intrinsic", NO_PREP_ERRORS)):
        pt = minimize_avg_error(clean, p, prior_bright)
        out[name] = {"window": pt.window, "avg_error": pt.avg_error,
                     "fidelity": 1.0 - pt.avg_error, "avg_time": pt.avg_time}
    return out
