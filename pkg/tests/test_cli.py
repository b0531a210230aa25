import json
import math

import numpy as np
import pytest

from ionread import calibrate, cli
from ionread.rates import DEFAULT_CONSTANTS, two_level_rate
from ionread.tables import dumps_table, read_table


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def report(out):
    return json.loads((out / "report.json").read_text())


def write_calibration(path, eps, seed):
    rng = np.random.default_rng(seed)
    pts = calibrate.synthetic_points(eps, np.linspace(0.1, 8, 12) * DEFAULT_CONSTANTS.i_sat, rng)
    lines = ["intensity_mw_cm2,rate_cps,rate_err_cps"]
    lines += [f"{p.intensity / 10!r},{p.rate!r},{p.rate_error!r}" for p in pts]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_visibility(path, alpha, values=None):
    taus = np.linspace(0.0, 1.5 * alpha, 10)
    vis = values if values is not None else [0.9 * math.exp(-(t / alpha) ** 2) for t in taus]
    lines = ["exposure_ms,visibility,visibility_err"]
    lines += [f"{float(t) * 1e3!r},{float(v)!r},0.02" for t, v in zip(taus, vis)]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_rates_formula_route(tmp_path):
    code, out = run(tmp_path, "r", "rates", "--set", "intensity = 56.2 mW/cm2")
    assert code == 0
    res = report(out)["results"]
    assert res["beam"]["saturation_param"] == pytest.approx(1.102, abs=5e-4)
    assert res["formula"]["r_d"] == pytest.approx(493, rel=2e-3)


def test_rates_zero_intensity(tmp_path):
    code, out = run(tmp_path, "r", "rates", "--set", "intensity = 0 mW/cm2")
    assert code == 0
    r = report(out)["results"]["formula"]
    assert (r["r_o"], r["detected_bright"], r["r_d"], r["r_b"]) == (0, 0, 0, 0)


@pytest.mark.parametrize("line", ["intensity = 56.2 bananas", "window = 20", "nonsense = 1 s",
                                  "windows = "])
def test_schema_errors_exit_2(tmp_path, line, capsys):
    code, _ = run(tmp_path, "bad", "error-curve", "--set", line)
    assert code == 2
    assert "schema error" in capsys.readouterr().err


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_error_curve_outputs_and_round_trip(tmp_path):
    code, out = run(tmp_path, "ec", "error-curve", "--svg")
    assert code == 0
    rep = report(out)
    assert rep["provenance"]["timestamp"] is None
    assert {"error_curve.csv", "error_vs_window.svg", "error_vs_time.svg"} <= set(
        rep["results"]["files"])
    text = (out / "error_curve.csv").read_text()
    rows = read_table(out / "error_curve.csv")
    assert len(rows) == 50
    # lossless: re-emitting the ingested rows reproduces the file exactly
    assert dumps_table(list(rows[0]), rows) == text
    for row, pt in zip(rows, rep["results"]["curve"]):
        assert row["dark_error"] == pt["dark_error"]
        assert row["avg_error"] == pt["avg_error"]
    near = [r for r in rows if 9 <= r["avg_time_us"] <= 13]
    assert near and min(r["avg_error"] for r in near) <= 9e-4


def test_error_curve_mc_overlay(tmp_path):
    code, out = run(tmp_path, "ec", "error-curve", "--mc-overlay", "--trials", "100000",
                    "--set", "windows = 1, 5, 20, 100, 500 us")
    assert code == 0
    mc = report(out)["results"]["monte_carlo"]
    assert len(mc) == 5
    for m in mc:
        assert m["dark_error_z"] < 4 and m["bright_error_z"] < 4


def test_reports_and_svgs_byte_identical(tmp_path):
    argv = ["mc", "--seed", "5", "--trials", "20000", "--dump",
            "--set", "windows = 5, 20 us"]
    code_a, a = run(tmp_path, "a", *argv)
    code_b, b = run(tmp_path, "b", *argv)
    assert code_a == code_b == 0
    for name in ("report.json", "mc.csv", "traces.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    code_a, a = run(tmp_path, "c", "error-curve", "--svg")
    code_b, b = run(tmp_path, "d", "error-curve", "--svg")
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_seed_changes_mc_output(tmp_path):
    _, a = run(tmp_path, "a", "mc", "--seed", "1", "--trials", "5000")
    _, b = run(tmp_path, "b", "mc", "--seed", "2", "--trials", "5000")
    assert (a / "mc.csv").read_bytes() != (b / "mc.csv").read_bytes()


def test_mc_dump_columns(tmp_path):
    code, out = run(tmp_path, "m", "mc", "--trials", "100", "--dump")
    assert code == 0
    rows = read_table(out / "traces.csv")
    assert len(rows) == 200
    assert dumps_table(list(rows[0]), rows) == (out / "traces.csv").read_text()
    assert set(rows[0]) == {"trial", "prepared_state", "n_photons", "first_arrival_ns",
                            "stop_time_ns", "outcome"}


def test_calibrate_three_datasets(tmp_path):
    files = [write_calibration(tmp_path / f"{n}.csv", eps, i)
             for i, (n, eps) in enumerate([("free", 0.02171), ("fiber", 0.01777),
                                           ("snspd", 0.04356)])]
    code, out = run(tmp_path, "cal", "calibrate", *map(str, files), "--svg")
    assert code == 0
    rep = report(out)
    bd = rep["results"]["breakdown"]
    assert bd["eps_fc"][0] == pytest.approx(0.818, abs=0.02)
    assert bd["eps_det"][0] == pytest.approx(0.784, abs=0.03)
    assert not rep["warnings"]
    assert (out / "saturation.svg").exists()


def test_calibrate_single_dataset_warns(tmp_path):
    f = write_calibration(tmp_path / "one.csv", 0.04356, 3)
    code, out = run(tmp_path, "cal", "calibrate", str(f))
    assert code == 0
    rep = report(out)
    assert "breakdown" not in rep["results"]
    assert any("breakdown omitted" in w for w in rep["warnings"])
    fit = rep["results"]["fits"][0]["fit"]
    assert fit["eps_sys"] == pytest.approx(0.04356, rel=0.02)


def test_calibrate_missing_header_exit_3(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("# header forgotten\n1.0,100\n2.0,200\n")
    code, _ = run(tmp_path, "cal", "calibrate", str(f))
    assert code == 3
    assert "bad.csv:2" in capsys.readouterr().err


def test_calibrate_degenerate_exit_3(tmp_path):
    f = tmp_path / "deg.csv"
    f.write_text("intensity_mw_cm2,rate_cps\n10,100\n10,101\n10,99\n")
    code, _ = run(tmp_path, "cal", "calibrate", str(f))
    assert code == 3


def test_ramsey_fit(tmp_path):
    f = write_visibility(tmp_path / "v.csv", 0.814)
    code, out = run(tmp_path, "rf", "ramsey-fit", str(f), "--svg")
    assert code == 0
    fit = report(out)["results"]["coherence_fit"]
    assert fit["coherence_time"] == pytest.approx(0.814, rel=1e-6)
    assert (out / "coherence.svg").exists()


def test_crosstalk_from_dataset(tmp_path):
    f = write_visibility(tmp_path / "v.csv", 0.814)
    code, out = run(tmp_path, "x", "crosstalk", str(f), "--set", "avg_detect_time = 11 us")
    assert code == 0
    res = report(out)["results"]
    assert res["budget"]["per_measurement_decoherence"] == pytest.approx(1.35e-5, rel=2e-3)
    assert res["budget"]["measurements_to_decohere"] == 74000
    assert res["shuttle_plan"]["total_time_ns"] == 171680


def test_crosstalk_shuttle_200um(tmp_path):
    code, out = run(tmp_path, "x", "crosstalk", "--set", "coherence_time = 94 ms",
                    "--set", "distance = 200 um")
    assert code == 0
    res = report(out)["results"]
    assert res["shuttle_plan"]["total_time_ns"] == 92800
    assert res["shuttle_plan"]["n_steps"] == 40
    # derived from the first-photon policy at the default 20 us window
    assert res["avg_detect_time"] == pytest.approx(11.06e-6, rel=1e-3)


def test_crosstalk_constant_data_exit_4(tmp_path, capsys):
    f = write_visibility(tmp_path / "flat.csv", 0.814, values=[0.9] * 10)
    code, _ = run(tmp_path, "x", "crosstalk", str(f))
    assert code == 4
    assert "numerical error" in capsys.readouterr().err


def test_crosstalk_needs_alpha(tmp_path):
    code, _ = run(tmp_path, "x", "crosstalk")
    assert code == 2


def test_sweep(tmp_path):
    code, out = run(tmp_path, "s", "sweep", "--svg", "--set", "sweep_param = background",
                    "--set", "sweep_values = 0, 4.2, 20 cps")
    assert code == 0
    rows = read_table(out / "sweep.csv")
    errs = [r["min_avg_error"] for r in rows]
    assert errs == sorted(errs)
    assert rows[0]["min_avg_error"] == pytest.approx(1 - 0.99936, abs=2e-5)
    assert (out / "sweep.svg").exists()


def test_threshold_one_analytic_exit_3_mc_ok(tmp_path, capsys):
    code, _ = run(tmp_path, "u", "error-curve", "--set", "threshold = 1")
    assert code == 3
    assert "ionread mc" in capsys.readouterr().err
    code, out = run(tmp_path, "m", "mc", "--trials", "20000", "--set", "threshold = 1",
                    "--set", "windows = 100 us")
    assert code == 0
    pt = report(out)["results"]["points"][0]
    # a higher threshold suppresses background false-brights
    assert pt["dark_error"] < pt["analytic_dark_error"]


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("background = 0 cps\nwindows = 20 us\n")
    code, out = run(tmp_path, "c", "error-curve", "--config", str(cfg))
    assert code == 0
    assert report(out)["inputs"]["background"] == 0
