"""Ramsey coherence fits, shuttle timing and measurement-crosstalk budgets."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lsq
from .errors import ConvergenceError, DegenerateDataError, DomainError

STEP_SIZE = 5e-6       # m per shuttle step
STEP_PERIOD = 2.32e-6  # s per DAC update
MAX_AMPLITUDE = 1.05


@dataclass(frozen=True)
class VisibilityPoint:
    exposure: float
    visibility: float
    visibility_error: float

    def __post_init__(self):
        if self.exposure < 0:
            raise DomainError("exposure must be >= 0")
        if not self.visibility_error > 0:
            raise DomainError("visibility_error must be > 0")


@dataclass(frozen=True)
class CoherenceFit:
    amplitude: float
    amplitude_error: float
    coherence_time: float
    coherence_time_error: float
    chi2: float
    converged: bool


@dataclass(frozen=True)
class ShuttlePlan:
    distance: float
    step_size: float
    step_period: float
    n_steps: int
    total_time: float

    @property
    def total_time_ns(self):
        # exact for step periods that are whole picoseconds
        return self.n_steps * round(self.step_period * 1e9, 3)


@dataclass(frozen=True)
class CrosstalkBudget:
    per_measurement_decoherence: float
    measurements_to_decohere: int
    absorption_crosstalk: float | None = None
    gaussian_first_measurement: float = 0.0
    definition: str = "linear exposure budget: t_avg / coherence_time (inferred definition)"


def gaussian_visibility(exposure, amplitude, coherence_time):
    return amplitude * np.exp(-(np.asarray(exposure) / coherence_time) ** 2)


def fit_coherence(points):
    """Fit A exp(-tau^2 / alpha^2) to Ramsey visibilities."""
    points = sorted(points, key=lambda p: (p.exposure, p.visibility, p.visibility_error))
    tau = np.array([p.exposure for p in points])
    vis = np.array([p.visibility for p in points])
    err = np.array([p.visibility_error for p in points])
    if np.unique(tau).size < 3:
        raise DegenerateDataError("need at least 3 distinct exposures")

    # starting point from log V = log A - tau^2 / alpha^2 on the positive points
    pos = vis > 0
    if pos.sum() < 2:
        raise DegenerateDataError("too few positive visibilities")
    wt = (vis[pos] / err[pos]) ** 2
    slope, icpt = np.polyfit(tau[pos] ** 2, np.log(vis[pos]), 1, w=np.sqrt(wt))
    if not slope < 0:
        raise ConvergenceError("visibility does not decay: coherence time unbounded",
                               {"slope": float(slope)})
    p0 = [min(math.exp(icpt), MAX_AMPLITUDE), 1.0 / math.sqrt(-slope)]
    scale = p0[1]

    def model(x, p):
        return p[0] * np.exp(-(x / (p[1] * scale)) ** 2)

    res = lsq.fit(model, [p0[0], 1.0], tau, vis, err)
    amp, alpha = res.params[0], res.params[1] * scale
    amp_err, alpha_err = res.errors[0], res.errors[1] * scale
    if not (0 < amp <= MAX_AMPLITUDE) or not alpha > 0 or alpha > 1e3 * tau.max():
        raise ConvergenceError("fit driven to a parameter bound",
                               {"amplitude": float(amp), "coherence_time": float(alpha)})
    return CoherenceFit(amplitude=float(amp), amplitude_error=float(amp_err),
                        coherence_time=float(alpha), coherence_time_error=float(alpha_err),
                        chi2=res.chi2, converged=res.converged)


def _snap_int(x, rel=1e-9):
    r = round(x)
    return r if abs(x - r) <= rel * max(abs(x), 1.0) else None


def shuttle_time(distance, step_size=STEP_SIZE, step_period=STEP_PERIOD):
    """Steps and time to move an ion ``distance`` in fixed steps."""
    if distance < 0 or not step_size > 0 or not step_period > 0:
        raise DomainError("need distance >= 0 and positive step size and period")
    ratio = distance / step_size
    n = _snap_int(ratio)
    n = int(n if n is not None else math.ceil(ratio))
    return ShuttlePlan(distance=distance, step_size=step_size, step_period=step_period,
                       n_steps=n, total_time=n * step_period)


def measurement_crosstalk(coherence_time, avg_detect_time):
    """Per-measurement decoherence and measurements until coherence is lost.

    Linear budget: each detection spends ``avg_detect_time`` of the data
    qubit's ``coherence_time``.  Also reports the first-measurement loss a
    Gaussian decay would give, 1 - exp(-(t_avg/alpha)^2).
    """
    if not coherence_time > 0 or not avg_detect_time > 0:
        raise DomainError("coherence_time and avg_detect_time must be > 0")
    ratio = coherence_time / avg_detect_time
    n = _snap_int(ratio, rel=1e-12)
    n_star = int(n if n is not None else math.floor(ratio))
    per = min(avg_detect_time / coherence_time, 1.0)
    return CrosstalkBudget(per_measurement_decoherence=per, measurements_to_decohere=n_star,
                           gaussian_first_measurement=-math.expm1(-(1.0 / ratio) ** 2))


def resonant_cross_section(wavelength):
    return 3.0 * wavelength ** 2 / (2.0 * math.pi)


def absorption_crosstalk(distance, scatter_rate, exposure, wavelength=369.5e-9):
    """Chance that the data ion absorbs a photon scattered by the ancilla.

    Resonant cross-section over the sphere of radius ``distance``, times the
    number of photons scattered during ``exposure``.
    """
    if not distance > 0:
        raise DomainError("distance must be > 0")
    if scatter_rate < 0 or exposure < 0:
        raise DomainError("scatter_rate and exposure must be >= 0")
    frac = resonant_cross_section(wavelength) / (4.0 * math.pi * distance ** 2)
    return min(frac * scatter_rate * exposure, 1.0)
