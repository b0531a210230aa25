"""Acceptance gate: one test per criterion, each at its stated tolerance."""
import importlib
import inspect
import math
import pathlib
import time

import numpy as np

from ionread import calibrate, crosstalk, mcsim, stats
from ionread.calibrate import Measured
from ionread.rates import DEFAULT_CONSTANTS, MEASURED_RATES
from ionread.stats import NO_PREP_ERRORS, PrepErrors

RATES = MEASURED_RATES
PREP = PrepErrors()


def test_criterion_1_quadrature_equivalence(acceptance):
    windows = np.logspace(-7, 0, 50)
    start = time.perf_counter()
    worst = 0.0
    for w in windows:
        for state, closed in (("dark", stats.p_zero_dark), ("bright", stats.p_zero_bright)):
            quad = stats.mixture_pmf(0, stats.state_mixture(RATES, state, w))
            ref = closed(w, RATES)
            worst = max(worst, abs(quad - ref) / ref)
    elapsed = time.perf_counter() - start
    acceptance(1, "closed form vs quadrature", worst <= 1e-9 and elapsed < 5.0,
               f"max rel diff {worst:.2e} (<= 1e-9), {elapsed:.2f} s (< 5 s)")


def test_criterion_2_headline(acceptance):
    start = time.perf_counter()
    window, err = stats.fidelity_at_avg_time(RATES, PREP, 11e-6)
    t_avg = stats.avg_stop_time(RATES, window)
    elapsed = time.perf_counter() - start
    ok = abs(t_avg - 11e-6) <= 0.5e-6 and 6.9e-4 / 1.5 <= err <= 6.9e-4 * 1.5 and elapsed < 1.0
    acceptance(2, "first-photon headline", ok,
               f"window {window * 1e6:.2f} us, avg time {t_avg * 1e6:.3f} us, avg error "
               f"{err:.3e} (fidelity {100 * (1 - err):.4f} %), {elapsed:.3f} s")


def test_criterion_3_zero_background(acceptance):
    lim = stats.zero_background_limit(RATES, PREP)
    fids = {k: 100 * v["fidelity"] for k, v in lim.items()}
    ok = any(abs(f - 99.941) <= 0.05 for f in fids.values())
    acceptance(3, "zero-background limit", ok,
               ", ".join(f"{k} {v:.4f} %" for k, v in fids.items()) + " (target 99.941 +/- 0.05)")


def test_criterion_4_monte_carlo(acceptance):
    n = 1_000_000
    worst_z, slowest, parts = 0.0, 0.0, []
    for w in (1e-6, 5e-6, 20e-6, 100e-6, 500e-6):
        dark_an, bright_an = stats.observed_errors(w, RATES, PREP)
        for state, p_an in (("dark", dark_an), ("bright", bright_an)):
            cfg = mcsim.TrialConfig(RATES, state, w, prep=PREP)
            start = time.perf_counter()
            ens = mcsim.simulate_ensemble(cfg, n, 20240101)
            slowest = max(slowest, time.perf_counter() - start)
            decided_bright = ens.n_photons > 0
            wrong = np.count_nonzero(decided_bright != (state == "bright"))
            se = math.sqrt(p_an * (1 - p_an) / n)
            z = abs(wrong / n - p_an) / se
            worst_z = max(worst_z, z)
            parts.append(f"{state}@{w * 1e6:g}us z={z:.2f}")
    cfg = mcsim.TrialConfig(RATES, "dark", 100e-6, prep=PREP)
    one = mcsim.simulate_ensemble(cfg, n, 7, threads=1)
    many = mcsim.simulate_ensemble(cfg, n, 7, threads=4)
    same = all(np.array_equal(getattr(one, k), getattr(many, k))
               for k in ("actual_bright", "transition", "n_before", "n_after", "first_tick"))
    ok = worst_z < 4 and slowest < 10.0 and same
    acceptance(4, "Monte Carlo oracle", ok,
               f"worst |z| {worst_z:.2f} (< 4), slowest 1e6-trial run {slowest:.2f} s (< 10 s), "
               f"threads 1 vs 4 identical: {same}")


def test_criterion_5_decomposition(acceptance):
    b = calibrate.decompose(Measured(0.02171, 0.00009), Measured(0.01777, 0.00007),
                            Measured(0.04356, 0.00006), pmt_qe=0.32)
    ok = abs(b.eps_fc.value - 0.8185) <= 0.006 and round(b.eps_det.value, 3) == 0.784
    acceptance(5, "calibration decomposition", ok,
               f"eps_fc {b.eps_fc.value:.4f} +/- {b.eps_fc.error:.4f}, "
               f"eps_det {b.eps_det.value:.4f} +/- {b.eps_det.error:.4f}")


def test_criterion_6_saturation_coverage(acceptance):
    rng = np.random.default_rng(0)
    intensities = np.linspace(0.1, 8.0, 15) * DEFAULT_CONSTANTS.i_sat
    eps = 0.04356
    hits = 0
    for _ in range(200):
        fit = calibrate.fit_saturation(calibrate.synthetic_points(eps, intensities, rng))
        hits += abs(fit.eps_sys - eps) <= 2 * fit.eps_sys_error
    acceptance(6, "saturation-fit coverage", hits >= 190,
               f"{hits}/200 within 2 sigma (need >= 190)")


def test_criterion_7_crosstalk(acceptance):
    b = crosstalk.measurement_crosstalk(0.814, 11e-6)
    s200 = crosstalk.shuttle_time(200e-6)
    s370 = crosstalk.shuttle_time(370e-6)
    p_abs = crosstalk.absorption_crosstalk(370e-6, RATES.r_o, 11e-6)
    ok = (b.measurements_to_decohere == 74000
          and round(b.per_measurement_decoherence, 7) == 1.35e-5
          and s200.total_time_ns == 92800 and s370.total_time_ns == 171680
          and 1e-6 <= p_abs <= 1e-5)
    acceptance(7, "crosstalk arithmetic", ok,
               f"n_star {b.measurements_to_decohere}, per-measurement "
               f"{b.per_measurement_decoherence:.4e}, shuttle {s200.total_time_ns / 1e3} us / "
               f"{s370.total_time_ns / 1e3} us, absorption {p_abs:.3e}")


def _property_tests():
    here = pathlib.Path(__file__).parent
    for path in sorted(here.glob("test_*.py")):
        if path.stem == "test_acceptance":
            continue
        mod = importlib.import_module(path.stem)
        for name, fn in inspect.getmembers(mod, inspect.isfunction):
            if getattr(fn, "is_hypothesis_test", False):
                yield f"{path.stem}::{name}", fn


def test_criterion_8_property_suites(acceptance):
    failures, few, count = [], [], 0
    for name, fn in _property_tests():
        count += 1
        n = fn._hypothesis_internal_use_settings.max_examples
        if n < 1000:
            few.append(f"{name} ({n})")
        try:
            fn()
        except Exception as exc:  # report every failing property, not just the first
            failures.append(f"{name}: {type(exc).__name__}")
    ok = count > 0 and not failures and not few
    acceptance(8, "property suites", ok,
               f"{count} properties at >= 1000 cases each; failures: {failures or 'none'}; "
               f"under-sampled: {few or 'none'}")
