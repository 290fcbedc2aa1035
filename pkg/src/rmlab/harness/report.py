"""Run reports: verdicts, tables, and deterministic JSON/CSV emission."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

MOMENT_COLUMNS = ["scenario", "m", "n", "N", "p", "estimate", "std_error", "ratio"]
TAIL_COLUMNS = ["threshold", "survival", "ci_low", "ci_high", "n"]


@dataclass
class Verdict:
    """One checked property.  ``invariant`` names what was tested; the
    statistic, threshold and slack used go in ``details``."""

    name: str
    invariant: str
    status: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in (PASS, FAIL, INCONCLUSIVE):
            raise ValueError(f"bad verdict status {self.status!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "invariant": self.invariant, "status": self.status,
                "details": self.details}


def check(name: str, invariant: str, ok: bool, **details) -> Verdict:
    return Verdict(name, invariant, PASS if ok else FAIL, details)


@dataclass
class RunReport:
    scenario: str
    config: dict = field(default_factory=dict)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    tail_curves: dict[str, list[dict]] = field(default_factory=dict)
    fits: dict[str, dict] = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    seed: int = 0
    wall_clock: float = 0.0

    def add_rows(self, table: str, rows) -> None:
        self.tables.setdefault(table, []).extend(rows)

    def verdict(self, v: Verdict) -> Verdict:
        self.verdicts.append(v)
        return v

    @property
    def status(self) -> str:
        states = {v.status for v in self.verdicts}
        return FAIL if FAIL in states else PASS

    def exit_code(self) -> int:
        return 1 if self.status == FAIL else 0

    def merge(self, other: RunReport) -> None:
        for name, rows in other.tables.items():
            self.add_rows(name, rows)
        for name, rows in other.tail_curves.items():
            self.tail_curves[name] = rows
        self.fits.update(other.fits)
        self.verdicts.extend(other.verdicts)
        self.warnings.extend(other.warnings)
        self.config.setdefault("runs", {})[other.scenario] = other.config
        self.wall_clock += other.wall_clock

    def to_dict(self) -> dict:
        from .. import __version__
        return {
            "scenario": self.scenario,
            "status": self.status,
            "library_version": __version__,
            "seed_provenance": {"master_seed": self.seed,
                                "stream": "SeedSequence(master, spawn_key=(trial, *keys)) / PCG64"},
            "config": self.config,
            "tables": self.tables,
            "tail_curves": self.tail_curves,
            "fits": self.fits,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "warnings": self.warnings,
        }


def _clean(obj):
    """JSON-safe, deterministic: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _csv_value(row.get(k, "")) for k in columns})


def emit_report(report: RunReport, path) -> list[Path]:
    """Write report.json plus one CSV per table into directory ``path``.

    Wall-clock time is kept out of report.json (it would break byte-identical
    reruns) and goes to timing.json instead.
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        target = out / "report.json"
        text = json.dumps(_clean(report.to_dict()), indent=2, sort_keys=True, allow_nan=False)
        target.write_text(text + "\n", encoding="utf-8")
        written.append(target)
        for name, rows in sorted(report.tables.items()):
            columns = MOMENT_COLUMNS if name == "moments" else _columns(rows)
            target = out / f"{name}.csv"
            write_csv(target, columns, rows)
            written.append(target)
        for name, rows in sorted(report.tail_curves.items()):
            target = out / f"tail_{name}.csv"
            write_csv(target, TAIL_COLUMNS, rows)
            written.append(target)
        target = out / "verdicts.csv"
        write_csv(target, ["name", "invariant", "status"], [v.to_dict() for v in report.verdicts])
        written.append(target)
        target = out / "timing.json"
        target.write_text(json.dumps({"wall_clock_seconds": report.wall_clock}) + "\n", encoding="utf-8")
        written.append(target)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return written


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    return cols
