"""CSV emission and ingestion.

Emitted floats use ``repr`` so every table reads back bit-identically.
Ingested files need a header row; lines starting with ``#`` are comments.
"""
from __future__ import annotations

import csv
import io
import json
import math

from .calibrate import CalibrationPoint
from .crosstalk import VisibilityPoint
from .errors import DomainError
from .rates import intensity_from_power


class TableError(DomainError):
    """Malformed input table; the message names the offending line."""


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps_table(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_table(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_table(columns, rows))


def _convert(text):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_table(path, required=(), any_of=()):
    """Rows of a headed CSV as dicts with numeric fields converted.

    ``required`` columns must all be present; at least one group in
    ``any_of`` (a sequence of column tuples) must be fully present.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [(n, line) for n, line in enumerate(fh, start=1)
                 if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise TableError(f"{path}: no data")
    n0, first = lines[0]
    header = next(csv.reader([first]))
    header = [h.strip() for h in header]
    if all(_is_number(h) for h in header if h) or not any(header):
        raise TableError(f"{path}:{n0}: missing header row")
    missing = [c for c in required if c not in header]
    if missing:
        raise TableError(f"{path}:{n0}: missing column(s) {', '.join(missing)}")
    if any_of and not any(all(c in header for c in grp) for grp in any_of):
        opts = " or ".join("+".join(g) for g in any_of)
        raise TableError(f"{path}:{n0}: need column(s) {opts}")
    rows = []
    for n, line in lines[1:]:
        cells = next(csv.reader([line]))
        if len(cells) != len(header):
            raise TableError(f"{path}:{n}: expected {len(header)} fields, got {len(cells)}")
        row = {h: _convert(c.strip()) for h, c in zip(header, cells)}
        for c in required:
            if row[c] is None:
                raise TableError(f"{path}:{n}: empty {c}")
        rows.append(row)
    if not rows:
        raise TableError(f"{path}: header but no data rows")
    return rows


def _number(row, key, path):
    v = row[key]
    if not isinstance(v, (int, float)) or not math.isfinite(v):
        raise TableError(f"{path}: non-numeric {key} value {v!r}")
    return float(v)


def read_calibration_csv(path):
    """CalibrationPoints from intensity_mw_cm2 (or power_nw + waist_um) and rate_cps."""
    rows = read_table(path, required=("rate_cps",),
                      any_of=(("intensity_mw_cm2",), ("power_nw", "waist_um")))
    out = []
    for r in rows:
        if r.get("intensity_mw_cm2") is not None:
            inten = _number(r, "intensity_mw_cm2", path) * 10.0
        else:
            inten = intensity_from_power(_number(r, "power_nw", path) * 1e-9,
                                         _number(r, "waist_um", path) * 1e-6)
        err = r.get("rate_err_cps")
        out.append(CalibrationPoint(intensity=inten, rate=_number(r, "rate_cps", path),
                                    rate_error=None if err is None else float(err)))
    return out


def read_visibility_csv(path):
    rows = read_table(path, required=("exposure_ms", "visibility", "visibility_err"))
    return [VisibilityPoint(exposure=_number(r, "exposure_ms", path) * 1e-3,
                            visibility=_number(r, "visibility", path),
                            visibility_error=_number(r, "visibility_err", path))
            for r in rows]


def dumps_report(report):
    """Deterministic JSON: sorted keys, fixed indentation."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
