"""Detector-chain efficiency calibration from a saturation curve.

A 174Yb+ ion is a two-level scatterer; its detected rate versus pump
intensity fixes the total system efficiency eps_sys.  Comparing eps_sys
between detection schemes splits it into fiber coupling and detector
efficiency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import lsq
from .errors import DegenerateDataError, DomainError
from .rates import DEFAULT_CONSTANTS

N_EXPERIMENTS = 300
DETECTION_TIME = 0.5e-3  # s per experiment
PMT_QE = 0.32
EPS_PG = 0.10
EPS_FIBER = 0.731


class Measured(NamedTuple):
    value: float
    error: float = 0.0


@dataclass(frozen=True)
class CalibrationPoint:
    intensity: float            # W/m^2
    rate: float                 # counts/s
    rate_error: float | None = None

    def __post_init__(self):
        if self.intensity < 0:
            raise DomainError("intensity must be >= 0")
        if self.rate < 0:
            raise DomainError("rate must be >= 0")
        if self.rate_error is not None and not self.rate_error > 0:
            raise DomainError("rate_error must be > 0")


@dataclass(frozen=True)
class SaturationFit:
    eps_sys: float
    eps_sys_error: float
    i_sat_used: float
    i_sat_error: float
    residual_norm: float
    chi2: float
    dof: int
    converged: bool


@dataclass(frozen=True)
class EfficiencyBreakdown:
    eps_pg: Measured
    eps_fc: Measured
    eps_fiber: Measured
    eps_det: Measured

    @property
    def product(self):
        return self.eps_pg.value * self.eps_fc.value * self.eps_fiber.value * self.eps_det.value


def shot_noise_error(rate, n_exp=N_EXPERIMENTS, t_det=DETECTION_TIME):
    """Standard error of a rate averaged over ``n_exp`` intervals of ``t_det``."""
    exposure = n_exp * t_det
    return math.sqrt(max(rate * exposure, 1.0)) / exposure


def _saturation(x, p, gamma):
    # x = I / I_sat_reference; p = (eps, I_sat / I_sat_reference)
    u = x / p[1]
    return p[0] * (gamma / 2.0) * u / (1.0 + u)


def fit_saturation(points, constants=DEFAULT_CONSTANTS, fit_i_sat=False,
                   n_exp=N_EXPERIMENTS, t_det=DETECTION_TIME):
    """Weighted least-squares fit of the two-level saturation curve.

    Points without ``rate_error`` get shot-noise weights for an average over
    ``n_exp`` intervals of ``t_det`` (default 300 x 0.5 ms).
    """
    points = list(points)
    if len(points) < 3:
        raise DegenerateDataError("need at least 3 calibration points")
    inten = np.array([p.intensity for p in points], dtype=float)
    rate = np.array([p.rate for p in points], dtype=float)
    if np.ptp(inten) == 0:
        raise DegenerateDataError("all calibration intensities are equal")
    if not np.any(rate > 0):
        raise DegenerateDataError("all calibration rates are zero")
    sigma = np.array([p.rate_error if p.rate_error is not None
                      else shot_noise_error(p.rate, n_exp, t_det) for p in points])

    x = inten / constants.i_sat
    gamma = constants.gamma
    # the model is linear in eps for a fixed I_sat: start from the exact weighted solution
    shape = (gamma / 2.0) * x / (1.0 + x)
    w = 1.0 / sigma ** 2
    eps0 = float(np.sum(w * shape * rate) / np.sum(w * shape * shape))

    if fit_i_sat:
        res = lsq.fit(lambda xx, p: _saturation(xx, p, gamma), [eps0, 1.0], x, rate, sigma)
        eps, isat_scale = res.params
        eps_err, isat_err = res.errors
        n_par = 2
        chi2, converged = res.chi2, res.converged
        n_par = 2
    else:
        # linear in eps: one Gauss-Newton step from anywhere lands on eps0
        eps, isat_scale = eps0, 1.0
        eps_err, isat_err = 1.0 / math.sqrt(float(np.sum(w * shape * shape))), 0.0
        chi2, converged = float(np.sum(w * (rate - eps * shape) ** 2)), True
        n_par = 1
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"fitted eps_sys={eps:.4g} lies outside [0, 1]")
    return SaturationFit(eps_sys=float(eps), eps_sys_error=float(eps_err),
                         i_sat_used=float(isat_scale * constants.i_sat),
                         i_sat_error=float(isat_err * constants.i_sat),
                         residual_norm=math.sqrt(chi2), chi2=chi2,
                         dof=len(points) - n_par, converged=converged)


def synthetic_points(eps_sys, intensities, rng, constants=DEFAULT_CONSTANTS,
                     n_exp=N_EXPERIMENTS, t_det=DETECTION_TIME):
    """Shot-noise calibration data: Poisson counts over ``n_exp * t_det`` per point."""
    from .rates import two_level_rate

    exposure = n_exp * t_det
    out = []
    for i in intensities:
        mean = two_level_rate(i, eps_sys, constants) * exposure
        counts = rng.poisson(mean)
        out.append(CalibrationPoint(intensity=float(i), rate=counts / exposure,
                                    rate_error=math.sqrt(max(counts, 1)) / exposure))
    return out


def _ratio(a, b):
    if a.value == 0 or b.value == 0:
        raise DomainError("efficiencies must be non-zero")
    v = a.value / b.value
    return Measured(v, abs(v) * math.hypot(a.error / a.value, b.error / b.value))


def decompose(eps_sys_free_pmt, eps_sys_fiber_pmt, eps_sys_snspd, eps_pg=EPS_PG,
              eps_fiber=Measured(EPS_FIBER, 0.008), pmt_qe=PMT_QE):
    """Split the system efficiencies into the efficiency chain.

    Fiber coupling is the ratio of fiber-coupled to free-space PMT
    efficiency; the SNSPD efficiency is the SNSPD/fiber-PMT ratio times the
    PMT quantum efficiency.  Arguments are Measured pairs or plain floats.
    """
    free, fib, sn, qe, fiber, pg = (x if isinstance(x, Measured) else Measured(float(x))
                                    for x in (eps_sys_free_pmt, eps_sys_fiber_pmt,
                                              eps_sys_snspd, pmt_qe, eps_fiber, eps_pg))
    for m in (free, fib, sn, qe, fiber, pg):
        if not 0.0 < m.value <= 1.0:
            raise DomainError(f"efficiency {m.value} is outside (0, 1]")
    eps_fc = _ratio(fib, free)
    ratio = _ratio(sn, fib)
    det_v = ratio.value * qe.value
    det_e = det_v * math.hypot(ratio.error / ratio.value, qe.error / qe.value)
    return EfficiencyBreakdown(eps_pg=pg, eps_fc=eps_fc, eps_fiber=fiber,
                               eps_det=Measured(det_v, det_e))
