import pytest

from ionread import tables
from ionread.tables import TableError


def test_table_round_trip(tmp_path):
    rows = [{"a": 1, "b": 0.1 + 0.2, "c": "x"}, {"a": 2, "b": 1e-300, "c": None}]
    p = tmp_path / "t.csv"
    tables.write_table(p, ["a", "b", "c"], rows)
    back = tables.read_table(p, required=("a", "b"))
    assert back == rows
    assert p.read_text().splitlines()[0] == "a,b,c"


def test_missing_header_names_line(tmp_path):
    p = tmp_path / "cal.csv"
    p.write_text("# a comment\n\n1.0,2.0\n")
    with pytest.raises(TableError, match=r"cal.csv:3: missing header"):
        tables.read_calibration_csv(p)


def test_bad_rows(tmp_path):
    p = tmp_path / "cal.csv"
    p.write_text("intensity_mw_cm2,rate_cps\n1,2\n3\n")
    with pytest.raises(TableError, match=":3:"):
        tables.read_calibration_csv(p)
    p.write_text("intensity_mw_cm2,rate_cps\n1,abc\n")
    with pytest.raises(TableError, match="non-numeric"):
        tables.read_calibration_csv(p)
    p.write_text("power_nw,rate_cps\n1,2\n")
    with pytest.raises(TableError, match="need column"):
        tables.read_calibration_csv(p)
    p.write_text("intensity_mw_cm2,rate_cps\n")
    with pytest.raises(TableError, match="no data rows"):
        tables.read_calibration_csv(p)


def test_calibration_csv_axes(tmp_path):
    p = tmp_path / "cal.csv"
    p.write_text("intensity_mw_cm2,rate_cps,rate_err_cps\n51,1000,10\n102,1500,\n")
    pts = tables.read_calibration_csv(p)
    assert pts[0].intensity == pytest.approx(510.0)
    assert pts[0].rate_error == 10.0 and pts[1].rate_error is None
    q = tmp_path / "pow.csv"
    q.write_text("power_nw,waist_um,rate_cps\n49.7,15,2000\n")
    assert tables.read_calibration_csv(q)[0].intensity == pytest.approx(140.6, abs=0.05)


def test_visibility_csv(tmp_path):
    p = tmp_path / "vis.csv"
    p.write_text("exposure_ms,visibility,visibility_err\n0,0.9,0.02\n100,0.8,0.02\n")
    pts = tables.read_visibility_csv(p)
    assert pts[1].exposure == pytest.approx(0.1)


def test_report_json_deterministic():
    a = tables.dumps_report({"b": 1, "a": [1.5, None]})
    assert a == tables.dumps_report({"a": [1.5, None], "b": 1})
    assert a.startswith('{\n  "a"')
    with pytest.raises(ValueError):
        tables.dumps_report({"x": float("nan")})
