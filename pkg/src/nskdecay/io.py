"""CSV and JSON writers with a fixed, versioned schema.

Floats are written with ``repr`` so that identical runs give byte-identical
files; no timestamps go into CSV output.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .entropy import EntropyReport

SCHEMA_VERSION = 1

SERIES_COLUMNS = EntropyReport.columns()
VERIFY_COLUMNS = ["generator", "profile", "mean", "min", "max", "zero_fraction",
                  "lhs", "rhs", "ratio"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_series_csv(path, records) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for rec in records:
            w.writerow([_fmt(v) for v in rec.as_row()])


def read_series_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [EntropyReport(**{k: float(v) for k, v in row.items()}) for row in rows]


def write_verify_csv(path, reports) -> None:
    """One row per profile across one or more RatioReports of the same check."""
    extra_keys = sorted({k for rep in reports for k in rep.extra})
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*VERIFY_COLUMNS, *extra_keys, "status"])
        for rep in reports:
            gen = rep.parameters.get("generator", "")
            for i in range(len(rep.ratio)):
                meta = rep.metadata[i] if i < len(rep.metadata) else {}
                row = [gen, i, *(meta.get(k, math.nan) for k in ("mean", "min", "max", "zero_fraction")),
                       rep.lhs[i], rep.rhs[i], rep.ratio[i],
                       *(rep.extra[k][i] if k in rep.extra else math.nan for k in extra_keys),
                       rep.status[i]]
                w.writerow([_fmt(v) for v in row])


def write_table_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "value"):
        return obj.value
    return obj


def write_json(path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
