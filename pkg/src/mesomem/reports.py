"""CSV/JSON serialization of sweep and recovery reports.

CSV files always carry a header row; the JSON mirrors use identical field
names.  Non-finite limit values are serialized as the string "infinite",
never as a bare float infinity.
"""

from __future__ import annotations

import csv
import json
import math

from .minimize import SweepReport
from .recovery import RecoveryReport

SWEEP_FIELDS = ["eps", "min_energy", "profile_energy", "limit_energy",
                "gap", "iters", "seconds"]
RECOVERY_FIELDS = ["eps", "r", "t", "res1", "res2", "E_part", "G_part",
                   "total", "limit_quarter", "limit_half", "gap"]


def _cell(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "infinite"
    if isinstance(value, float):
        return f"{value:.17g}"
    return value


def _rows(records, fields, zero_seconds: bool):
    rows = []
    for rec in records:
        row = {f: getattr(rec, f) for f in fields}
        if zero_seconds and "seconds" in row:
            row["seconds"] = 0.0
        rows.append(row)
    return rows


def write_sweep_csv(path, report: SweepReport, deterministic: bool = False):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        w.writeheader()
        for row in _rows(report.records, SWEEP_FIELDS, deterministic):
            w.writerow({k: _cell(v) for k, v in row.items()})


def write_sweep_json(path, report: SweepReport, deterministic: bool = False):
    rows = _rows(report.records, SWEEP_FIELDS, deterministic)
    payload = {"records": [{k: (_cell(v) if isinstance(v, float)
                                and not math.isfinite(v) else v)
                            for k, v in row.items()} for row in rows]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_recovery_csv(path, report: RecoveryReport):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RECOVERY_FIELDS)
        w.writeheader()
        for row in _rows(report.records, RECOVERY_FIELDS, False):
            w.writerow({k: _cell(v) for k, v in row.items()})


def write_recovery_json(path, report: RecoveryReport):
    payload = {
        "records": _rows(report.records, RECOVERY_FIELDS, False),
        "failures": [{"eps": f.eps, "error": f.error} for f in report.failures],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
