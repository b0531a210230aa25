"""Figures for the CLI reports.

All figures are written as SVG with a fixed hash salt and no date stamp, so
identical inputs give byte-identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "ionread",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.labelsize": 11,
    "legend.fontsize": 9,
    "legend.frameon": False,
    "lines.linewidth": 1.5,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "axes.grid": True,
    "grid.alpha": 0.3,
}

COLORS = {"dark": "#1f4e9a", "bright": "#c0392b", "avg": "#222222", "mc": "#7d3c98"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _figure(width=5.0, height=3.6):
    return plt.subplots(figsize=(width, height))


def error_curve_figure(points, path, mc=None):
    """Dark/bright error vs detection window, with optional MC error bars."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        w = np.array([p.window for p in points]) * 1e6
        ax.loglog(w, [p.dark_error for p in points], color=COLORS["dark"], label="dark |0>")
        ax.loglog(w, [p.bright_error for p in points], color=COLORS["bright"],
                  label="bright |1>")
        if mc:
            mw = np.array([m["window"] for m in mc]) * 1e6
            for state, marker in (("dark", "o"), ("bright", "s")):
                ax.errorbar(mw, [m[f"{state}_error"] for m in mc],
                            yerr=[2 * m[f"{state}_error_se"] for m in mc], fmt=marker,
                            ms=3.5, color=COLORS[state], mfc="none", label=f"MC {state}")
        ax.set_xlabel("detection window (us)")
        ax.set_ylabel("detection error probability")
        ax.legend()
        _save(fig, path)


def error_vs_time_figure(points, path, mc=None, marker=None):
    """Average error vs average first-photon detection time."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.semilogy([p.avg_time * 1e6 for p in points], [p.avg_error for p in points],
                    color=COLORS["avg"], label="analytic")
        if mc:
            ax.errorbar([m["avg_time"] * 1e6 for m in mc], [m["avg_error"] for m in mc],
                        yerr=[2 * m["avg_error_se"] for m in mc], fmt="o", ms=3.5,
                        color=COLORS["mc"], mfc="none", label="Monte Carlo")
        if marker is not None:
            ax.plot([marker[0] * 1e6], [marker[1]], "*", ms=10, color=COLORS["bright"],
                    label=f"{marker[0] * 1e6:.1f} us: {100 * (1 - marker[1]):.3f} %")
        ax.set_xlabel("average detection time (us)")
        ax.set_ylabel("average detection error")
        ax.legend()
        _save(fig, path)


def saturation_figure(datasets, path, constants):
    """Detected rate vs intensity for one or more calibration datasets."""
    from .rates import two_level_rate

    with plt.rc_context(STYLE):
        fig, ax = _figure()
        for label, points, fit in datasets:
            x = np.array([p.intensity for p in points]) / 10.0
            y = np.array([p.rate for p in points]) / 1e3
            err = np.array([p.rate_error or 0.0 for p in points]) / 1e3
            line = ax.errorbar(x, y, yerr=err, fmt="o", ms=3.5, mfc="none", label=label)
            grid = np.linspace(0.0, x.max() * 1.05, 200)
            model = [two_level_rate(g * 10.0, fit.eps_sys, constants, i_sat=fit.i_sat_used)
                     for g in grid]
            ax.plot(grid, np.array(model) / 1e3, color=line[0].get_color())
        ax.set_xlabel("pump intensity (mW/cm^2)")
        ax.set_ylabel("detected rate (kcps)")
        ax.legend()
        _save(fig, path)


def coherence_figure(points, fit, path):
    from .crosstalk import gaussian_visibility

    with plt.rc_context(STYLE):
        fig, ax = _figure()
        t = np.array([p.exposure for p in points])
        ax.errorbar(t * 1e3, [p.visibility for p in points],
                    yerr=[p.visibility_error for p in points], fmt="o", ms=3.5, mfc="none",
                    color=COLORS["dark"], label="data")
        grid = np.linspace(0.0, t.max() * 1.05, 200)
        ax.plot(grid * 1e3, gaussian_visibility(grid, fit.amplitude, fit.coherence_time),
                color=COLORS["avg"],
                label=f"alpha = {fit.coherence_time * 1e3:.0f} +/- "
                      f"{fit.coherence_time_error * 1e3:.0f} ms")
        ax.set_xlabel("time between pulses (ms)")
        ax.set_ylabel("fringe visibility")
        ax.set_ylim(bottom=0)
        ax.legend()
        _save(fig, path)


def sweep_figure(rows, param, unit, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        x = [r["value"] for r in rows]
        ax.plot(x, [r["min_avg_error"] for r in rows], "o-", color=COLORS["avg"],
                label="minimum average error")
        ax.plot(x, [r["error_at_target"] for r in rows], "s--", color=COLORS["bright"],
                label="error at target time")
        ax.set_yscale("log")
        ax.set_xlabel(f"{param} ({unit})")
        ax.set_ylabel("average detection error")
        ax.legend()
        _save(fig, path)
