"""Run reports and their CSV serialization."""

import csv
import math
import os
from dataclasses import dataclass, field

from .errors import IoError


@dataclass
class RunReport:
    kind: str
    config: dict
    rows: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.flags.values())

    def summary_line(self):
        items = {"kind": self.kind, **self.summary}
        items.update({f"pass_{k}": v for k, v in self.flags.items()})
        items["passed"] = self.passed
        return " ".join(f"{k}={format_value(v)}" for k, v in items.items())


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    if isinstance(v, (list, tuple)):
        return ";".join(format_value(x) for x in v)
    return str(v)


def write_csv(path, rows):
    if not rows:
        header = []
    else:
        header = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(row[k]) for k in header])


def write_report(report, out_dir):
    """Writes <kind>.csv, one CSV per table and summary.txt; returns the paths."""
    stem = report.kind.replace("-", "_")
    paths = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        main = os.path.join(out_dir, f"{stem}.csv")
        write_csv(main, report.rows)
        paths.append(main)
        for name, rows in report.tables.items():
            p = os.path.join(out_dir, f"{stem}_{name}.csv")
            write_csv(p, rows)
            paths.append(p)
        summary = os.path.join(out_dir, "summary.txt")
        with open(summary, "w", encoding="utf-8") as fh:
            fh.write(report.summary_line() + "\n")
        paths.append(summary)
    except OSError as exc:
        raise IoError(f"cannot write report to {out_dir}: {exc}") from exc
    return paths


def read_csv(path):
    """Rows of a report CSV as dicts of strings (for round-trip checks)."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
