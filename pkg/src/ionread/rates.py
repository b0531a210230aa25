"""Atomic constants and the scattering / pumping rates of a 171Yb+ qubit.

The formula route (``RateSet.from_beam``) evaluates the optimised bright
scattering rate and the off-resonant dark/bright pumping rates for a given
detection beam.  The measured route (``RateSet.measured``) takes rates
straight from experiment and bypasses the formulas.  The dark/bright pumping
formulas carry no detuning dependence and are approximate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

TWO_PI = 2.0 * math.pi
MW_PER_CM2 = 10.0  # W/m^2


@dataclass(frozen=True)
class AtomicConstants:
    gamma: float = TWO_PI * 19.6e6          # 2P1/2 linewidth, rad/s
    delta_hfp: float = TWO_PI * 2.1e9       # 2P1/2 hyperfine splitting, rad/s
    delta_hfs: float = TWO_PI * 12.6e9      # 2S1/2 hyperfine splitting, rad/s
    i_sat: float = 51.0 * MW_PER_CM2        # W/m^2
    wavelength: float = 369.5e-9            # m

    def __post_init__(self):
        for name in ("gamma", "delta_hfp", "delta_hfs", "i_sat", "wavelength"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")
        if not self.delta_hfs > self.delta_hfp:
            raise DomainError("delta_hfs must exceed delta_hfp")


DEFAULT_CONSTANTS = AtomicConstants()


def saturation_param(intensity, constants=DEFAULT_CONSTANTS):
    """On-resonance saturation parameter, identified with ``I / I_sat``."""
    if intensity < 0:
        raise DomainError(f"intensity must be >= 0, got {intensity}")
    return intensity / constants.i_sat


@dataclass(frozen=True)
class BeamParams:
    """Detection beam: intensity (W/m^2) and detuning from the cycling line (rad/s).

    ``saturation_param`` defaults to ``intensity / I_sat``; pass it explicitly
    to work in the Rabi-frequency picture instead.
    """

    intensity: float
    detuning: float = 0.0
    saturation_param: float | None = None
    constants: AtomicConstants = field(default=DEFAULT_CONSTANTS, repr=False)

    def __post_init__(self):
        if self.intensity < 0:
            raise DomainError("intensity must be >= 0")
        if self.saturation_param is None:
            object.__setattr__(self, "saturation_param",
                               saturation_param(self.intensity, self.constants))
        elif self.saturation_param < 0:
            raise DomainError("saturation_param must be >= 0")


@dataclass(frozen=True)
class ChannelParams:
    eps_sys: float
    r_bg: float = 0.0
    timing_resolution: float = 5e-9

    def __post_init__(self):
        if not 0.0 <= self.eps_sys <= 1.0:
            raise DomainError("eps_sys must lie in [0, 1]")
        if self.r_bg < 0:
            raise DomainError("r_bg must be >= 0")
        if not self.timing_resolution > 0:
            raise DomainError("timing_resolution must be > 0")


def bright_scatter_rate(beam, constants=DEFAULT_CONSTANTS):
    """Scattering rate of |1> with optimal polarisation, photons/s."""
    g = constants.gamma
    s = beam.saturation_param
    return (1.0 / 3.0) * (g / 2.0) * s / (1.0 + (2.0 / 3.0) * s + (2.0 * beam.detuning / g) ** 2)


def dark_pump_rate(beam, constants=DEFAULT_CONSTANTS):
    """Approximate off-resonant |1> -> |0> pumping rate, 1/s."""
    g = constants.gamma
    return (1.0 / 3.0) * (g / 2.0) * beam.saturation_param * (g / (2.0 * constants.delta_hfp)) ** 2


def bright_pump_rate(beam, constants=DEFAULT_CONSTANTS):
    """Approximate off-resonant |0> -> |1> pumping rate, 1/s."""
    g = constants.gamma
    detour = 2.0 * (constants.delta_hfp + constants.delta_hfs)
    return (2.0 / 3.0) * (g / 2.0) * beam.saturation_param * (g / detour) ** 2


def pump_ratio(constants=DEFAULT_CONSTANTS):
    """bright_pump_rate / dark_pump_rate, independent of the beam."""
    return 2.0 * (constants.delta_hfp / (constants.delta_hfp + constants.delta_hfs)) ** 2


def two_level_rate(intensity, eps_sys, constants=DEFAULT_CONSTANTS, i_sat=None):
    """Detected count rate of a driven two-level ion (174Yb+) on resonance."""
    if intensity < 0:
        raise DomainError("intensity must be >= 0")
    if not 0.0 <= eps_sys <= 1.0:
        raise DomainError("eps_sys must lie in [0, 1]")
    x = intensity / (constants.i_sat if i_sat is None else i_sat)
    return eps_sys * (constants.gamma / 2.0) * x / (1.0 + x)


def intensity_from_power(power, waist):
    """Peak intensity 2P/(pi w^2) of a Gaussian beam with 1/e^2 radius ``waist``."""
    if not waist > 0:
        raise DomainError(f"waist must be > 0, got {waist}")
    if power < 0:
        raise DomainError(f"power must be >= 0, got {power}")
    return 2.0 * power / (math.pi * waist ** 2)


@dataclass(frozen=True)
class RateSet:
    """Rates that set the photon statistics of one detection interval.

    ``detected_bright`` is the detected bright-state count rate eps_sys*R_o;
    ``r_o`` is the raw scattering rate.  All rates are per second.
    """

    r_o: float
    detected_bright: float
    r_d: float
    r_b: float
    r_bg: float
    source: str = "measured"

    def __post_init__(self):
        for name in ("r_o", "detected_bright", "r_d", "r_b", "r_bg"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")
        if self.detected_bright > self.r_o * (1 + 1e-12):
            raise DomainError("detected_bright cannot exceed r_o")

    @classmethod
    def measured(cls, detected_bright, r_d, r_b, r_bg, eps_sys=None):
        """Rates taken directly from experiment.

        ``r_o`` is reconstructed as ``detected_bright / eps_sys`` when the
        efficiency is known, otherwise it is set equal to the detected rate.
        """
        r_o = detected_bright / eps_sys if eps_sys else detected_bright
        return cls(r_o=r_o, detected_bright=detected_bright, r_d=r_d, r_b=r_b,
                   r_bg=r_bg, source="measured")

    @classmethod
    def from_beam(cls, beam, channel, constants=DEFAULT_CONSTANTS):
        r_o = bright_scatter_rate(beam, constants)
        return cls(r_o=r_o, detected_bright=channel.eps_sys * r_o,
                   r_d=dark_pump_rate(beam, constants),
                   r_b=bright_pump_rate(beam, constants),
                   r_bg=channel.r_bg, source="formula (approximate pumping rates)")

    def with_background(self, r_bg):
        return RateSet(self.r_o, self.detected_bright, self.r_d, self.r_b, r_bg, self.source)

    def as_dict(self):
        return {"r_o": self.r_o, "detected_bright": self.detected_bright,
                "r_d": self.r_d, "r_b": self.r_b, "r_bg": self.r_bg,
                "source": self.source}


# Rates measured at 56.2 mW/cm^2 with the fiber-coupled SNSPD (eps_sys = 4.356 %).
MEASURED_EPS_SYS = 0.04356
MEASURED_RATES = RateSet.measured(detected_bright=472e3, r_d=341.0, r_b=16.4, r_bg=4.2,
                                  eps_sys=MEASURED_EPS_SYS)
