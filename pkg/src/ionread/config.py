"""Run configuration: ``key = value unit`` text with mandatory unit suffixes.

Example::

    # measured rates
    detected_bright = 472 kcps
    dark_pump = 341 Hz
    bright_pump = 16.4 Hz
    background = 4.2 cps
    window = 20 us
    windows = 1, 5, 20, 100, 500 us

Dimensionless keys take a bare number or a percentage.  Unknown keys and
missing or wrong units are rejected.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from . import units
from .calibrate import DETECTION_TIME, EPS_FIBER, EPS_PG, N_EXPERIMENTS, PMT_QE
from .crosstalk import STEP_PERIOD, STEP_SIZE
from .discriminate import Policy
from .rates import (DEFAULT_CONSTANTS, AtomicConstants, BeamParams, ChannelParams,
                    RateSet)
from .stats import PrepErrors


class ConfigError(ValueError):
    """Schema violation: unknown key, bad unit or inconsistent settings."""


# key -> (dimension or kind, attribute)
SCHEMA = {
    "rates": ("word", "rate_source"),
    "detected_bright": ("rate", "detected_bright"),
    "dark_pump": ("rate", "dark_pump"),
    "bright_pump": ("rate", "bright_pump"),
    "background": ("rate", "background"),
    "eps_sys": ("fraction", "eps_sys"),
    "intensity": ("intensity", "intensity"),
    "detuning": ("angular", "detuning"),
    "gamma": ("angular", "gamma"),
    "delta_hfp": ("angular", "delta_hfp"),
    "delta_hfs": ("angular", "delta_hfs"),
    "i_sat": ("intensity", "i_sat"),
    "wavelength": ("length", "wavelength"),
    "timing_resolution": ("time", "timing_resolution"),
    "prep_dark": ("fraction", "prep_dark"),
    "prep_bright": ("fraction", "prep_bright"),
    "prior_bright": ("fraction", "prior_bright"),
    "policy": ("word", "policy"),
    "threshold": ("count", "threshold"),
    "window": ("time", "window"),
    "windows": ("time_list", "windows"),
    "window_min": ("time", "window_min"),
    "window_max": ("time", "window_max"),
    "window_points": ("count", "window_points"),
    "window_spacing": ("word", "window_spacing"),
    "target_avg_time": ("time", "target_avg_time"),
    "trials": ("count", "trials"),
    "seed": ("count", "seed"),
    "distance": ("length", "distance"),
    "step_size": ("length", "step_size"),
    "step_period": ("time", "step_period"),
    "coherence_time": ("time", "coherence_time"),
    "avg_detect_time": ("time", "avg_detect_time"),
    "n_experiments": ("count", "n_experiments"),
    "detection_time": ("time", "detection_time"),
    "pmt_qe": ("fraction", "pmt_qe"),
    "eps_pg": ("fraction", "eps_pg"),
    "eps_fiber": ("fraction", "eps_fiber"),
    "eps_fiber_err": ("fraction", "eps_fiber_err"),
    "fit_i_sat": ("bool", "fit_i_sat"),
    "sweep_param": ("word", "sweep_param"),
    "sweep_values": ("raw_list", "sweep_values"),
}

WORDS = {
    "rate_source": ("measured", "formula"),
    "policy": ("first_photon", "fixed_window"),
    "window_spacing": ("log", "linear"),
    "sweep_param": ("background", "detected_bright", "dark_pump", "bright_pump",
                    "intensity", "prep_dark", "prep_bright", "eps_sys"),
}


@dataclass
class RunConfig:
    rate_source: str = "measured"
    detected_bright: float = 472e3
    dark_pump: float = 341.0
    bright_pump: float = 16.4
    background: float = 4.2
    eps_sys: float = 0.04356
    intensity: float | None = None
    detuning: float = 0.0
    gamma: float = DEFAULT_CONSTANTS.gamma
    delta_hfp: float = DEFAULT_CONSTANTS.delta_hfp
    delta_hfs: float = DEFAULT_CONSTANTS.delta_hfs
    i_sat: float = DEFAULT_CONSTANTS.i_sat
    wavelength: float = DEFAULT_CONSTANTS.wavelength
    timing_resolution: float = 5e-9
    prep_dark: float = 1e-6
    prep_bright: float = 2e-4
    prior_bright: float = 0.5
    policy: str = "first_photon"
    threshold: int = 0
    window: float = 20e-6
    windows: list | None = None
    window_min: float = 1e-6
    window_max: float = 500e-6
    window_points: int = 50
    window_spacing: str = "log"
    target_avg_time: float = 11e-6
    trials: int = 100_000
    seed: int = 1
    distance: float = 370e-6
    step_size: float = STEP_SIZE
    step_period: float = STEP_PERIOD
    coherence_time: float | None = None
    avg_detect_time: float | None = None
    n_experiments: int = N_EXPERIMENTS
    detection_time: float = DETECTION_TIME
    pmt_qe: float = PMT_QE
    eps_pg: float = EPS_PG
    eps_fiber: float = EPS_FIBER
    eps_fiber_err: float = 0.008
    fit_i_sat: bool = False
    sweep_param: str | None = None
    sweep_values: list = field(default_factory=list)
    explicit: set = field(default_factory=set, repr=False)

    # derived objects -------------------------------------------------------
    def constants(self):
        return AtomicConstants(gamma=self.gamma, delta_hfp=self.delta_hfp,
                               delta_hfs=self.delta_hfs, i_sat=self.i_sat,
                               wavelength=self.wavelength)

    def beam(self):
        if self.intensity is None:
            return None
        return BeamParams(intensity=self.intensity, detuning=self.detuning,
                          constants=self.constants())

    def rates(self):
        if self.rate_source == "formula":
            if self.intensity is None:
                raise ConfigError("rates = formula needs an intensity")
            return RateSet.from_beam(self.beam(), ChannelParams(self.eps_sys, self.background,
                                                                self.timing_resolution),
                                     self.constants())
        return RateSet.measured(self.detected_bright, self.dark_pump, self.bright_pump,
                                self.background, eps_sys=self.eps_sys)

    def prep(self):
        return PrepErrors(self.prep_dark, self.prep_bright)

    def make_policy(self, window=None):
        kind = "first_photon_stop" if self.policy == "first_photon" else "fixed_window_threshold"
        return Policy(kind, self.window if window is None else window, self.threshold)

    def window_grid(self):
        if self.windows is not None:
            grid = sorted(self.windows)
        else:
            n = self.window_points
            lo, hi = self.window_min, self.window_max
            if n < 1 or not 0 < lo <= hi:
                raise ConfigError("window grid needs 0 < window_min <= window_max and points >= 1")
            if n == 1:
                grid = [lo]
            elif self.window_spacing == "log":
                step = (math.log(hi) - math.log(lo)) / (n - 1)
                grid = [math.exp(math.log(lo) + k * step) for k in range(n)]
                grid[-1] = hi
            else:
                grid = [lo + (hi - lo) * k / (n - 1) for k in range(n)]
        if not grid:
            raise ConfigError("window grid is empty")
        if grid[0] <= 0:
            raise ConfigError("windows must be > 0")
        return grid

    def echo(self):
        """Explicit settings plus everything the command uses, for the report."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "explicit":
                continue
            v = getattr(self, f.name)
            out[f.name] = v
        return out


def _parse_value(key, kind, text):
    text = text.strip()
    if kind == "word":
        attr = SCHEMA[key][1]
        allowed = WORDS.get(attr)
        if allowed and text not in allowed:
            raise ConfigError(f"{key}: expected one of {', '.join(allowed)}, got {text!r}")
        return text
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if kind == "count":
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
        if v != int(v) or v < 0:
            raise ConfigError(f"{key}: expected a non-negative integer, got {text!r}")
        return int(v)
    if kind == "time_list":
        return parse_list(text, "time")
    if kind == "raw_list":
        return [t.strip() for t in text.split(",") if t.strip()]
    try:
        return units.parse_quantity(text, kind)
    except units.UnitError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_list(text, dimension):
    """``"1, 5, 20 us"`` -> SI floats; a trailing unit applies to bare items."""
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        return []
    last = items[-1].split()
    trailing = last[1] if len(last) == 2 else ""
    out = []
    for it in items:
        if len(it.split()) == 1 and trailing and _bare_number(it):
            it = f"{it} {trailing}"
        try:
            out.append(units.parse_quantity(it, dimension))
        except units.UnitError as exc:
            raise ConfigError(str(exc)) from None
    return out


def _bare_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def apply_line(cfg, line, where="<override>"):
    body = line.split("#", 1)[0].strip()
    if not body:
        return
    if "=" not in body:
        raise ConfigError(f"{where}: expected 'key = value', got {line.strip()!r}")
    key, value = (s.strip() for s in body.split("=", 1))
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    kind, attr = SCHEMA[key]
    try:
        setattr(cfg, attr, _parse_value(key, kind, value))
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    cfg.explicit.add(attr)


def loads(text, source="<string>"):
    cfg = RunConfig()
    for n, line in enumerate(text.splitlines(), start=1):
        apply_line(cfg, line, f"{source}:{n}")
    _validate(cfg)
    return cfg


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), str(path))


def _validate(cfg):
    if cfg.rate_source == "measured" and "intensity" in cfg.explicit and not (
            cfg.explicit & {"detected_bright", "dark_pump", "bright_pump"}):
        cfg.rate_source = "formula"
    for name in ("prep_dark", "prep_bright", "prior_bright", "eps_sys", "pmt_qe"):
        if not 0.0 <= getattr(cfg, name) <= 1.0:
            raise ConfigError(f"{name} must lie in [0, 1]")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.seed >= 2 ** 64:
        raise ConfigError("seed must be < 2**64")
    return cfg


def finalize(cfg):
    return _validate(cfg)


SWEEP_DIMENSION = {
    "background": "rate", "detected_bright": "rate", "dark_pump": "rate",
    "bright_pump": "rate", "intensity": "intensity", "prep_dark": "fraction",
    "prep_bright": "fraction", "eps_sys": "fraction",
}
