"""Canonical report and table serialization.

Reports are plain dicts written as sorted-key JSON with shortest round-trip
float formatting, so a fixed (config, potential, seed) produces byte-identical
files regardless of thread count or wall clock.  No timestamps, no host
information.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA = "newtonlab/1"


def plain(obj):
    """Recursively convert numpy scalars/arrays and tuples to JSON-safe types."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def make_report(kind: str, config: dict, results: dict) -> dict:
    from . import __version__

    return {
        "schema": SCHEMA,
        "kind": kind,
        "package_version": __version__,
        "config": plain(config),
        "results": plain(results),
    }


def canonical_json(report: dict) -> str:
    return json.dumps(plain(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(path, report: dict) -> None:
    Path(path).write_text(canonical_json(report))


@dataclass(frozen=True)
class Table:
    """Column-ordered rows destined for CSV; None renders as an empty cell."""

    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_payload(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}

    @classmethod
    def from_payload(cls, payload: dict) -> "Table":
        return cls(columns=tuple(payload["columns"]),
                   rows=tuple(tuple(r) for r in payload["rows"]))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_table(path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])
