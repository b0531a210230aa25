"""Unit-tagged quantity parsing.

Everything inside the package is SI (s, m, W, W/m^2, 1/s, rad/s).  Text
inputs carry an explicit unit suffix, e.g. ``"56.2 mW/cm2"`` or ``"20 us"``.
"""
from __future__ import annotations

import math
import re

TWO_PI = 2.0 * math.pi

# dimension -> {unit: factor to SI}
UNITS: dict[str, dict[str, float]] = {
    "time": {
        "s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12,
    },
    "length": {
        "m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9,
    },
    "rate": {
        "hz": 1.0, "khz": 1e3, "mhz": 1e6, "cps": 1.0, "kcps": 1e3,
        "mcps": 1e6, "1/s": 1.0, "/s": 1.0,
    },
    "intensity": {
        "w/m2": 1.0, "mw/cm2": 10.0, "w/cm2": 1e4, "uw/cm2": 1e-2,
    },
    "power": {
        "w": 1.0, "mw": 1e-3, "uw": 1e-6, "µw": 1e-6, "nw": 1e-9,
    },
    # angular frequencies are written as ordinary frequencies and scaled by 2*pi
    "angular": {
        "rad/s": 1.0, "hz": TWO_PI, "khz": TWO_PI * 1e3, "mhz": TWO_PI * 1e6,
        "ghz": TWO_PI * 1e9,
    },
    "fraction": {"": 1.0, "%": 1e-2, "ppm": 1e-6},
    "count": {"": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


class UnitError(ValueError):
    """A quantity string had a missing, unknown or mismatched unit."""


def _lookup(dimension: str, unit: str) -> float:
    try:
        table = UNITS[dimension]
    except KeyError:
        raise UnitError(f"unknown dimension {dimension!r}") from None
    key = unit if unit in table else unit.lower()
    if key not in table:
        allowed = ", ".join(repr(u) for u in table if u) or "none"
        raise UnitError(f"unit {unit!r} is not a valid {dimension} unit (allowed: {allowed})")
    return table[key]


def parse_quantity(text: str, dimension: str) -> float:
    """Parse ``"<number> <unit>"`` into an SI float.

    >>> parse_quantity("20 us", "time")
    2e-05
    """
    m = _QUANTITY.match(text)
    if m is None:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit and dimension not in ("fraction", "count"):
        raise UnitError(f"quantity {text!r} needs a {dimension} unit suffix")
    factor = _lookup(dimension, unit)
    inv = round(1.0 / factor) if 0 < factor < 1 else 0
    if inv and abs(1.0 / factor - inv) < 1e-9 * inv:
        # "20 us" -> 20 / 1e6 is correctly rounded; 20 * 1e-6 is not
        return value / inv
    return value * factor


def to_unit(value: float, dimension: str, unit: str) -> float:
    """Express an SI value in ``unit``."""
    return value / _lookup(dimension, unit)
