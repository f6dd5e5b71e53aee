"""Walk reports and their CSV / JSON / plain-table renderings."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, TextIO

import numpy as np

SCHEMA_VERSION = 1
FORMATS = ("csv", "json", "pretty")
COLUMNS = ("step", "corner0", "corner1", "corner2", "corner3", "fidelity")


@dataclass
class StepRecord:
    step: int
    corners: tuple[float, float, float, float]
    fidelity: float = math.nan

    def row(self) -> list:
        return [self.step, *self.corners, self.fidelity]


@dataclass
class WalkReport:
    mode: str
    steps: list[StepRecord]
    final_pauli: dict[str, float] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    config_hash: str = ""
    wall_time: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)

    def corners(self) -> np.ndarray:
        return np.array([s.corners for s in self.steps])

    def fidelities(self) -> np.ndarray:
        return np.array([s.fidelity for s in self.steps])

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "config": self.config,
            "config_hash": self.config_hash,
            "wall_time_s": self.wall_time,
            "columns": list(COLUMNS),
            "steps": [_clean(s.row()) for s in self.steps],
            "final_pauli": self.final_pauli,
            "extra": self.extra,
        }

    def same_results(self, other: "WalkReport") -> bool:
        """Equality of everything except timing metadata."""
        a, b = self.to_dict(), other.to_dict()
        a.pop("wall_time_s")
        b.pop("wall_time_s")
        return json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


@dataclass
class SweepTable:
    p_grid: list[float]
    reports: list[WalkReport]
    summary: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": "decoherence-sweep",
            "p_grid": self.p_grid,
            "summary": self.summary,
            "reports": [r.to_dict() for r in self.reports],
        }


def _clean(row: list) -> list:
    """JSON has no NaN: missing fidelities become null."""
    return [None if isinstance(v, float) and math.isnan(v) else v for v in row]


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def to_csv(report: WalkReport | SweepTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(report, SweepTable):
        w.writerow(("p",) + COLUMNS)
        for p, r in zip(report.p_grid, report.reports):
            for s in r.steps:
                w.writerow([_fmt(p)] + [_fmt(v) for v in s.row()])
    else:
        w.writerow(COLUMNS)
        for s in report.steps:
            w.writerow([_fmt(v) for v in s.row()])
    return buf.getvalue()


def read_csv(text: str) -> list[dict[str, float]]:
    """Parse :func:`to_csv` output back to numbers (empty cells become NaN)."""
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (float(v) if v != "" else math.nan) for k, v in r.items()} for r in rows]


def to_json(report: WalkReport | SweepTable) -> str:
    return json.dumps(report.to_dict(), indent=1)


def _pretty_walk(report: WalkReport, out: list[str]) -> None:
    out.append(f"{'step':>4}  " + "  ".join(f"{'corner ' + str(c):>9}" for c in range(4)) + f"  {'fidelity':>9}")
    for s in report.steps:
        cells = "  ".join(f"{round(p, 4) + 0.0:9.4f}" for p in s.corners)
        fid = "" if math.isnan(s.fidelity) else f"{s.fidelity:9.4f}"
        out.append(f"{s.step:>4}  {cells}  {fid:>9}")


def to_pretty(report: WalkReport | SweepTable) -> str:
    out: list[str] = []
    if isinstance(report, SweepTable):
        for p, r in zip(report.p_grid, report.reports):
            out.append(f"p = {p:g}")
            _pretty_walk(r, out)
            out.append("")
        for k, v in report.summary.items():
            out.append(f"{k}: {v}")
    else:
        out.append(f"mode: {report.mode}")
        _pretty_walk(report, out)
        for k, v in report.extra.items():
            out.append(f"{k}: {v}")
    return "\n".join(out) + "\n"


RENDERERS = {"csv": to_csv, "json": to_json, "pretty": to_pretty}


def emit(report: WalkReport | SweepTable, fmt: str = "pretty", out: Optional[str | Path] = None,
         stream: Optional[TextIO] = None) -> str:
    """Render ``report`` and write it to ``out`` (a path) or ``stream`` (stdout by default)."""
    if fmt not in RENDERERS:
        raise ValueError(f"format must be one of {FORMATS}")
    text = RENDERERS[fmt](report)
    if out is not None:
        Path(out).write_text(text)
    else:
        (stream or sys.stdout).write(text)
    return text


def rows(reports: Sequence[WalkReport]) -> list[list]:
    return [s.row() for r in reports for s in r.steps]
