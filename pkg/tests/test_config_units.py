import math

import pytest
from hypothesis import given, settings, strategies as st

from ionread import config, units
from ionread.config import ConfigError
from ionread.units import UnitError


@pytest.mark.parametrize("text, dim, expected", [
    ("20 us", "time", 20e-6), ("20us", "time", 20e-6), ("1.5 ms", "time", 1.5e-3),
    ("472 kcps", "rate", 472e3), ("341 Hz", "rate", 341.0), ("4.2 cps", "rate", 4.2),
    ("56.2 mW/cm2", "intensity", 562.0), ("510 W/m2", "intensity", 510.0),
    ("370 um", "length", 370e-6), ("49.7 nW", "power", 49.7e-9),
    ("19.6 MHz", "angular", 2 * math.pi * 19.6e6), ("4.356 %", "fraction", 0.04356),
    ("0.5", "fraction", 0.5), ("3", "count", 3.0),
])
def test_parse_quantity(text, dim, expected):
    assert units.parse_quantity(text, dim) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("text, dim", [
    ("20", "time"), ("20 m", "time"), ("5 kcps", "time"), ("abc us", "time"),
    ("1 furlong", "length"), ("3 us", "fraction"),
])
def test_parse_quantity_rejects(text, dim):
    with pytest.raises(UnitError):
        units.parse_quantity(text, dim)


def test_to_unit_round_trip():
    assert units.to_unit(20e-6, "time", "us") == pytest.approx(20.0)


@settings(max_examples=1000, deadline=None)
@given(st.floats(1e-12, 1e12), st.sampled_from([(d, u) for d, t in units.UNITS.items()
                                                  for u in t if u]))
def test_unit_round_trip(value, dim_unit):
    dim, unit = dim_unit
    si = units.parse_quantity(f"{value!r} {unit}", dim)
    assert units.to_unit(si, dim, unit) == pytest.approx(value, rel=1e-14)


def test_defaults_reproduce_measured_rates():
    cfg = config.loads("")
    r = cfg.rates()
    assert (r.detected_bright, r.r_d, r.r_b, r.r_bg) == (472e3, 341.0, 16.4, 4.2)
    assert cfg.prep().p_prep_bright == 2e-4
    assert cfg.make_policy().kind == "first_photon_stop"


def test_loads_full_file():
    text = """
    # comment
    detected_bright = 400 kcps   # trailing comment
    background = 10 cps
    window = 15 us
    windows = 1, 5, 20 us
    policy = fixed_window
    threshold = 1
    prep_bright = 0.1 %
    seed = 7
    """
    cfg = config.loads(text)
    assert cfg.detected_bright == 400e3 and cfg.background == 10.0
    assert cfg.window_grid() == pytest.approx([1e-6, 5e-6, 20e-6])
    pol = cfg.make_policy()
    assert pol.kind == "fixed_window_threshold" and pol.threshold == 1
    assert pol.window == pytest.approx(15e-6)
    assert cfg.prep_bright == pytest.approx(1e-3)
    assert cfg.explicit >= {"detected_bright", "window", "seed"}


def test_intensity_alone_selects_formula_route():
    cfg = config.loads("intensity = 56.2 mW/cm2")
    assert cfg.rate_source == "formula"
    assert cfg.rates().source.startswith("formula")
    assert config.loads("intensity = 56.2 mW/cm2\ndark_pump = 300 Hz").rate_source == "measured"
    with pytest.raises(ConfigError):
        config.loads("rates = formula").rates()


@pytest.mark.parametrize("text", [
    "window = 20", "window = 20 kcps", "colour = blue", "just words",
    "policy = majority", "threshold = 1.5", "threshold = -1", "prep_dark = 2",
    "trials = 0", "fit_i_sat = maybe", "seed = 18446744073709551616",
])
def test_loads_rejects(text):
    with pytest.raises(ConfigError):
        config.loads(text)


def test_error_names_line():
    with pytest.raises(ConfigError, match="cfg.txt:3"):
        config.loads("seed = 1\n\nwindow = 3 parsecs\n", "cfg.txt")


def test_log_window_grid():
    cfg = config.loads("window_min = 1 us\nwindow_max = 100 us\nwindow_points = 3")
    assert cfg.window_grid() == pytest.approx([1e-6, 1e-5, 1e-4], rel=1e-12)
    cfg = config.loads("window_min = 1 us\nwindow_max = 3 us\nwindow_points = 3\n"
                       "window_spacing = linear")
    assert cfg.window_grid() == pytest.approx([1e-6, 2e-6, 3e-6])


def test_parse_list_units():
    assert config.parse_list("1, 5 us", "time") == pytest.approx([1e-6, 5e-6])
    with pytest.raises(ConfigError):
        config.parse_list("1, 5", "time")
