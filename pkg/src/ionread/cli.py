"""Command-line front end.

    ionread rates        --config run.cfg
    ionread error-curve  --config run.cfg --svg --mc-overlay
    ionread mc           --trials 1000000 --seed 7 --dump
    ionread calibrate    free_pmt.csv fiber_pmt.csv snspd.csv --svg
    ionread ramsey-fit   ramsey_370um.csv
    ionread crosstalk    ramsey_370um.csv --set "distance = 370 um"
    ionread sweep        --set "sweep_param = background" --set "sweep_values = 0, 1, 4.2, 10 cps"

Every command writes ``report.json`` (and CSV/SVG files) into ``--out``.
Exit codes: 0 success, 2 usage or schema error, 3 data error, 4 numerical
non-convergence.
"""
from __future__ import annotations

import argparse
import copy
import math
import os
import sys
from pathlib import Path

from . import __version__, config, crosstalk, discriminate, mcsim, rates, stats, units
from .calibrate import Measured, decompose, fit_saturation
from .errors import ConvergenceError, DomainError, UnsupportedConfiguration
from .tables import (TableError, dumps_report, read_calibration_csv, read_visibility_csv,
                     write_table)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, set):
        return sorted(obj)
    if hasattr(obj, "_asdict"):
        return _clean(obj._asdict())
    if hasattr(obj, "__dataclass_fields__"):
        return _clean({k: getattr(obj, k) for k in obj.__dataclass_fields__})
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def make_report(command, cfg, results, warnings=()):
    ts = os.environ.get("SOURCE_DATE_EPOCH")
    return _clean({
        "command": command,
        "inputs": cfg.echo(),
        "results": results,
        "provenance": {"version": __version__, "seed": cfg.seed,
                       "timestamp": int(ts) if ts else None,
                       "units": "SI (s, m, W/m^2, 1/s) unless a key says otherwise"},
        "warnings": list(warnings),
    })


def _write_report(out, report):
    path = out / "report.json"
    path.write_text(dumps_report(report), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# commands

def cmd_rates(cfg, args):
    consts = cfg.constants()
    results = {"constants": consts, "measured": cfg.rates().as_dict()
               if cfg.rate_source == "measured" else None}
    beam = cfg.beam()
    if beam is not None:
        formula = rates.RateSet.from_beam(
            beam, rates.ChannelParams(cfg.eps_sys, cfg.background, cfg.timing_resolution),
            consts)
        results["beam"] = {"intensity": beam.intensity,
                           "intensity_mw_cm2": units.to_unit(beam.intensity, "intensity",
                                                             "mW/cm2"),
                           "detuning": beam.detuning,
                           "saturation_param": beam.saturation_param}
        results["formula"] = formula.as_dict()
        results["formula"]["pump_ratio"] = rates.pump_ratio(consts)
    return make_report("rates", cfg, results), []


def _mc_point(cfg, r, prep, window, trials, seed, threads=None):
    est = discriminate.evaluate_with_errors(cfg.make_policy(window), r, prep,
                                            discriminate.MonteCarlo(trials, seed, threads),
                                            cfg.prior_bright)
    row = {"window": window}
    for k in ("dark_error", "bright_error", "avg_error", "avg_time"):
        row[k] = est[k].value
        row[k + "_se"] = est[k].std_error
    row["n_trials"] = trials
    return row


def _require_threshold_zero(cfg):
    if cfg.threshold != 0:
        raise UnsupportedConfiguration(
            "analytic curves cover threshold 0 only; use 'ionread mc' for threshold >= 1")


def cmd_error_curve(cfg, args):
    _require_threshold_zero(cfg)
    r, prep = cfg.rates(), cfg.prep()
    grid = cfg.window_grid()
    pts = stats.error_curve(r, prep, grid, cfg.prior_bright)
    window, err = stats.fidelity_at_avg_time(r, prep, cfg.target_avg_time, cfg.prior_bright)
    best = stats.minimize_avg_error(r, prep, cfg.prior_bright)
    limit = stats.zero_background_limit(r, prep, cfg.prior_bright)

    mc = []
    warnings = []
    if args.mc_overlay:
        for w in grid:
            row = _mc_point(cfg, r, prep, w, cfg.trials, cfg.seed)
            an = next(p for p in pts if p.window == w)
            for k in ("dark_error", "bright_error"):
                # binomial error of the expected value: defined even when MC sees no events
                p = getattr(an, k)
                se = math.sqrt(p * (1 - p) / row["n_trials"])
                diff = abs(row[k] - p)
                row[k + "_z"] = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
            mc.append(row)
        worst = max(max(m["dark_error_z"], m["bright_error_z"]) for m in mc)
        if worst > 4:
            warnings.append(f"Monte Carlo deviates from the analytic curve by {worst:.1f} sigma")

    cols = ["window_us", "dark_error", "bright_error", "avg_error", "avg_time_us"]
    rows = [{"window_us": p.window * 1e6, "dark_error": p.dark_error,
             "bright_error": p.bright_error, "avg_error": p.avg_error,
             "avg_time_us": p.avg_time * 1e6} for p in pts]
    if mc:
        cols += ["mc_dark_error", "mc_dark_error_se", "mc_bright_error", "mc_bright_error_se",
                 "mc_avg_error", "mc_avg_error_se", "mc_avg_time_us"]
        for row, m in zip(rows, mc):
            row.update({"mc_dark_error": m["dark_error"], "mc_dark_error_se": m["dark_error_se"],
                        "mc_bright_error": m["bright_error"],
                        "mc_bright_error_se": m["bright_error_se"],
                        "mc_avg_error": m["avg_error"], "mc_avg_error_se": m["avg_error_se"],
                        "mc_avg_time_us": m["avg_time"] * 1e6})
    write_table(args.out / "error_curve.csv", cols, rows)
    files = ["error_curve.csv"]
    if args.svg:
        from . import plotting
        plotting.error_curve_figure(pts, args.out / "error_vs_window.svg", mc)
        plotting.error_vs_time_figure(pts, args.out / "error_vs_time.svg", mc,
                                      marker=(cfg.target_avg_time, err))
        files += ["error_vs_window.svg", "error_vs_time.svg"]

    results = {
        "rates": r.as_dict(),
        "curve": pts,
        "at_target_avg_time": {"target_avg_time": cfg.target_avg_time, "window": window,
                               "avg_error": err, "fidelity": 1.0 - err},
        "minimum": {"window": best.window, "avg_error": best.avg_error,
                    "avg_time": best.avg_time, "fidelity": 1.0 - best.avg_error},
        "zero_background_limit": limit,
        "monte_carlo": mc or None,
        "files": files,
    }
    return make_report("error-curve", cfg, results, warnings), []


def cmd_mc(cfg, args):
    r, prep = cfg.rates(), cfg.prep()
    grid = cfg.windows if cfg.windows is not None else [cfg.window]
    rows = []
    for w in sorted(grid):
        row = _mc_point(cfg, r, prep, w, cfg.trials, cfg.seed)
        an = stats.error_point(r, prep, w, cfg.prior_bright)
        row.update({"analytic_dark_error": an.dark_error,
                    "analytic_bright_error": an.bright_error,
                    "analytic_avg_error": an.avg_error, "analytic_avg_time": an.avg_time})
        rows.append(row)
    cols = ["window", "n_trials", "dark_error", "dark_error_se", "bright_error",
            "bright_error_se", "avg_error", "avg_error_se", "avg_time", "avg_time_se",
            "analytic_dark_error", "analytic_bright_error", "analytic_avg_error",
            "analytic_avg_time"]
    write_table(args.out / "mc.csv", cols, rows)
    files = ["mc.csv"]
    if args.dump:
        policy = cfg.make_policy(cfg.window)
        dump = []
        for s in mcsim.STATES:
            ens = mcsim.simulate_ensemble(
                mcsim.TrialConfig(r, s, cfg.window, cfg.timing_resolution, prep),
                cfg.trials, cfg.seed)
            dump.extend(mcsim.dump_rows(ens, policy))
        write_table(args.out / "traces.csv", ["trial", "prepared_state", "n_photons",
                                              "first_arrival_ns", "stop_time_ns", "outcome"],
                    dump)
        files.append("traces.csv")
    warnings = []
    if cfg.threshold != 0:
        warnings.append("analytic_* columns are the threshold-0 reference, not the "
                        f"threshold-{cfg.threshold} policy")
    return make_report("mc", cfg, {"rates": r.as_dict(), "points": rows, "files": files},
                       warnings), []


CAL_LABELS = ("PMT (free-space)", "PMT (fiber coupled)", "SNSPD (fiber coupled)")


def cmd_calibrate(cfg, args):
    consts = cfg.constants()
    warnings = []
    datasets = []
    for i, path in enumerate(args.data):
        pts = read_calibration_csv(path)
        fit = fit_saturation(pts, consts, cfg.fit_i_sat, cfg.n_experiments, cfg.detection_time)
        label = CAL_LABELS[i] if len(args.data) == 3 else Path(path).stem
        datasets.append((label, pts, fit))
    results = {"fits": [{"dataset": lab, "path": str(p), "fit": fit}
                        for (lab, _, fit), p in zip(datasets, args.data)]}
    if len(datasets) == 3:
        (_, _, free), (_, _, fib), (_, _, sn) = datasets
        bd = decompose(Measured(free.eps_sys, free.eps_sys_error),
                       Measured(fib.eps_sys, fib.eps_sys_error),
                       Measured(sn.eps_sys, sn.eps_sys_error), eps_pg=cfg.eps_pg,
                       eps_fiber=Measured(cfg.eps_fiber, cfg.eps_fiber_err), pmt_qe=cfg.pmt_qe)
        results["breakdown"] = {"eps_pg": bd.eps_pg, "eps_fc": bd.eps_fc,
                                "eps_fiber": bd.eps_fiber, "eps_det": bd.eps_det,
                                "product": bd.product}
    else:
        warnings.append("efficiency breakdown omitted: it needs three datasets "
                        "(free-space PMT, fiber PMT, SNSPD) in that order")
    rows = []
    for lab, pts, fit in datasets:
        for p in pts:
            rows.append({"dataset": lab, "intensity_mw_cm2": p.intensity / 10.0,
                         "rate_cps": p.rate, "rate_err_cps": p.rate_error,
                         "model_cps": rates.two_level_rate(p.intensity, fit.eps_sys, consts,
                                                           i_sat=fit.i_sat_used)})
    write_table(args.out / "calibration_fit.csv",
                ["dataset", "intensity_mw_cm2", "rate_cps", "rate_err_cps", "model_cps"], rows)
    results["files"] = ["calibration_fit.csv"]
    if args.svg:
        from . import plotting
        plotting.saturation_figure(datasets, args.out / "saturation.svg", consts)
        results["files"].append("saturation.svg")
    return make_report("calibrate", cfg, results, warnings), []


def _coherence(cfg, args, results):
    pts = read_visibility_csv(args.data)
    fit = crosstalk.fit_coherence(pts)
    results["coherence_fit"] = fit
    rows = [{"exposure_ms": p.exposure * 1e3, "visibility": p.visibility,
             "visibility_err": p.visibility_error,
             "model": float(crosstalk.gaussian_visibility(p.exposure, fit.amplitude,
                                                          fit.coherence_time))}
            for p in pts]
    write_table(args.out / "coherence_fit.csv",
                ["exposure_ms", "visibility", "visibility_err", "model"], rows)
    results.setdefault("files", []).append("coherence_fit.csv")
    if args.svg:
        from . import plotting
        plotting.coherence_figure(pts, fit, args.out / "coherence.svg")
        results["files"].append("coherence.svg")
    return fit


def cmd_ramsey_fit(cfg, args):
    results = {}
    _coherence(cfg, args, results)
    return make_report("ramsey-fit", cfg, results), []


def cmd_crosstalk(cfg, args):
    results = {}
    warnings = []
    if args.data is not None:
        alpha = _coherence(cfg, args, results).coherence_time
    elif cfg.coherence_time is not None:
        alpha = cfg.coherence_time
    else:
        raise config.ConfigError("crosstalk needs a visibility CSV or coherence_time")
    r = cfg.rates()
    t_avg = cfg.avg_detect_time
    if t_avg is None:
        t_avg = stats.avg_stop_time(r, cfg.window, cfg.prior_bright)
        warnings.append(f"avg_detect_time derived from the first-photon policy at "
                        f"window {cfg.window * 1e6:g} us")
    budget = crosstalk.measurement_crosstalk(alpha, t_avg)
    absorb = crosstalk.absorption_crosstalk(cfg.distance, r.r_o, t_avg, cfg.wavelength)
    plan = crosstalk.shuttle_time(cfg.distance, cfg.step_size, cfg.step_period)
    results.update({
        "coherence_time": alpha,
        "avg_detect_time": t_avg,
        "budget": {"per_measurement_decoherence": budget.per_measurement_decoherence,
                   "measurements_to_decohere": budget.measurements_to_decohere,
                   "absorption_crosstalk": absorb,
                   "gaussian_first_measurement": budget.gaussian_first_measurement,
                   "definition": budget.definition},
        "shuttle_plan": {"distance": plan.distance, "step_size": plan.step_size,
                         "step_period": plan.step_period, "n_steps": plan.n_steps,
                         "total_time": plan.total_time, "total_time_ns": plan.total_time_ns,
                         "note": "one traversal of the distance in fixed steps; label as "
                                 "round-trip or one-way as appropriate"},
    })
    return make_report("crosstalk", cfg, results, warnings), []


def cmd_sweep(cfg, args):
    if cfg.sweep_param is None or not cfg.sweep_values:
        raise config.ConfigError("sweep needs sweep_param and sweep_values")
    _require_threshold_zero(cfg)
    dim = config.SWEEP_DIMENSION[cfg.sweep_param]
    values = config.parse_list(", ".join(cfg.sweep_values), dim)
    rows = []
    for v in values:
        c = copy.deepcopy(cfg)
        setattr(c, cfg.sweep_param, v)
        c.explicit.add(cfg.sweep_param)
        config.finalize(c)
        r, prep = c.rates(), c.prep()
        best = stats.minimize_avg_error(r, prep, c.prior_bright)
        window, err = stats.fidelity_at_avg_time(r, prep, c.target_avg_time, c.prior_bright)
        rows.append({"param": cfg.sweep_param, "value": v, "min_avg_error": best.avg_error,
                     "window_at_min_us": best.window * 1e6,
                     "avg_time_at_min_us": best.avg_time * 1e6,
                     "window_at_target_us": window * 1e6, "error_at_target": err})
    write_table(args.out / "sweep.csv", ["param", "value", "min_avg_error", "window_at_min_us",
                                         "avg_time_at_min_us", "window_at_target_us",
                                         "error_at_target"], rows)
    files = ["sweep.csv"]
    if args.svg:
        from . import plotting
        unit = {"rate": "1/s", "intensity": "W/m^2", "fraction": "1"}[dim]
        plotting.sweep_figure(rows, cfg.sweep_param, unit, args.out / "sweep.svg")
        files.append("sweep.svg")
    return make_report("sweep", cfg, {"points": rows, "files": files}), []


COMMANDS = {
    "rates": cmd_rates,
    "error-curve": cmd_error_curve,
    "mc": cmd_mc,
    "calibrate": cmd_calibrate,
    "ramsey-fit": cmd_ramsey_fit,
    "crosstalk": cmd_crosstalk,
    "sweep": cmd_sweep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="'KEY = VALUE'",
                        help="override one config entry (repeatable)")
    common.add_argument("--seed", type=int, help="Monte Carlo base seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per prepared state")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--svg", action="store_true", help="render figures as SVG")
    common.add_argument("--mc-overlay", action="store_true",
                        help="overlay Monte Carlo points on analytic curves")

    parser = argparse.ArgumentParser(prog="ionread", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"ionread {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("rates", parents=[common], help="scattering and pumping rates")
    sub.add_parser("error-curve", parents=[common], help="detection error vs window")
    p = sub.add_parser("mc", parents=[common], help="Monte Carlo detection errors")
    p.add_argument("--dump", action="store_true", help="write per-trial traces.csv")
    p = sub.add_parser("calibrate", parents=[common], help="saturation fit of eps_sys")
    p.add_argument("data", nargs="+", type=Path,
                   help="calibration CSV(s); three files = free PMT, fiber PMT, SNSPD")
    p = sub.add_parser("ramsey-fit", parents=[common], help="Gaussian coherence fit")
    p.add_argument("data", type=Path, help="visibility CSV")
    p = sub.add_parser("crosstalk", parents=[common], help="measurement crosstalk budget")
    p.add_argument("data", nargs="?", type=Path, help="visibility CSV (optional)")
    sub.add_parser("sweep", parents=[common], help="error vs one swept parameter")
    return parser


def load_config(args):
    cfg = config.load(args.config) if args.config else config.RunConfig()
    for line in args.set:
        config.apply_line(cfg, line, "--set")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    return config.finalize(cfg)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        report, _ = COMMANDS[args.command](cfg, args)
        path = _write_report(args.out, report)
    except (config.ConfigError, units.UnitError) as exc:
        print(f"ionread: schema error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"ionread: numerical error: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TableError, DomainError, UnsupportedConfiguration, OSError) as exc:
        print(f"ionread: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
