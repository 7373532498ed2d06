"""Experiment reports: statistic rows with verdicts, auxiliary tables, plot data."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PASS, FAIL, INFO = "PASS", "FAIL", "INFO"

ROW_COLUMNS = ("name", "value", "error", "threshold", "verdict", "note")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def config_hash(config: dict) -> str:
    blob = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


@dataclass
class StatRow:
    name: str
    value: float
    error: float | None = None
    threshold: float | None = None
    verdict: str = INFO
    note: str = ""


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int
    rows: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    plot_data: dict = field(default_factory=dict)
    wall_time: float = 0.0  # kept out of the serialised report to keep it reproducible
    inputs: dict | None = None  # resolved run parameters; hashed instead of config when set

    @property
    def config_hash(self) -> str:
        return config_hash(self.config if self.inputs is None else self.inputs)

    def add(self, name, value, error=None, threshold=None, verdict=INFO, note="") -> StatRow:
        if isinstance(verdict, (bool, np.bool_)):
            verdict = PASS if verdict else FAIL
        row = StatRow(name, _clean(value), _clean(error), _clean(threshold), verdict, note)
        self.rows.append(row)
        return row

    def row(self, name: str) -> StatRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r.verdict == FAIL]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return _clean(
            {
                "experiment": self.experiment,
                "config_hash": self.config_hash,
                "seed": self.seed,
                "inputs": self.inputs,
                "config": self.config,
                "passed": self.passed,
                "rows": [r.__dict__ for r in self.rows],
                "tables": self.tables,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in ROW_COLUMNS])
        return buf.getvalue()

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "report.csv").write_text(self.to_csv())
        for name, rows in self.tables.items():
            _write_table(out / f"table_{name}.csv", rows)
        if self.plot_data:
            pd = out / "plotdata"
            pd.mkdir(exist_ok=True)
            for name, points in self.plot_data.items():
                with open(pd / f"{name}.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(("x", "y", "series"))
                    for x, y, series in points:
                        w.writerow((_fmt(float(x)), _fmt(float(y)), series))


def _write_table(path: Path, rows: list) -> None:
    if not rows:
        path.write_text("")
        return
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


def curve(series: str, x, y) -> list:
    return [(float(a), float(b), series) for a, b in zip(x, y)]
