"""Deterministic tabular output and run manifests.

CSV files start with a ``# units:`` comment line, then the column header.
Floats are written with 17 significant digits so reruns compare byte for
byte and values round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Table", "format_value", "write_table", "write_json", "read_csv", "file_digest", "to_jsonable"]


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(value)


@dataclass
class Table:
    """Named columns of equal length with a unit string per column."""

    name: str
    columns: dict[str, object]
    units: dict[str, str]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"table {self.name!r}: columns have unequal lengths {sorted(lengths)}")
        missing = [c for c in self.columns if c not in self.units]
        if missing:
            raise ValueError(f"table {self.name!r}: no unit declared for {missing}")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def to_csv_text(self) -> str:
        names = list(self.columns)
        lines = ["# units: " + ", ".join(f"{c}={self.units[c]}" for c in names), ",".join(names)]
        cols = [self.columns[c] for c in names]
        for i in range(self.n_rows):
            lines.append(",".join(format_value(col[i]) for col in cols))
        return "\n".join(lines) + "\n"

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "units": {c: self.units[c] for c in self.columns},
            "columns": {c: to_jsonable(list(v)) for c, v in self.columns.items()},
            "meta": to_jsonable(self.meta),
        }


def to_jsonable(obj):
    """Convert numpy scalars/arrays and tuples into plain JSON types (non-finite floats become strings)."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else format_value(x)
    return obj


def _dump(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(obj), encoding="utf-8")
    return path


def write_table(table: Table, directory: Path, fmt: str = "csv") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = directory / f"{table.name}.csv"
        path.write_text(table.to_csv_text(), encoding="utf-8")
        return path
    if fmt == "json":
        return write_json(directory / f"{table.name}.json", table.to_jsonable())
    raise ValueError(f"unknown format {fmt!r}")


def read_csv(path: Path) -> tuple[dict[str, str], dict[str, list[str]]]:
    """Parse a file written by :func:`write_table`; returns ``(units, columns)`` with string cells."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# units:"):
        raise ValueError(f"{path}: missing units comment line")
    units = dict(item.split("=", 1) for item in lines[0][len("# units:") :].strip().split(", "))
    names = lines[1].split(",")
    cols: dict[str, list[str]] = {n: [] for n in names}
    for line in lines[2:]:
        for n, cell in zip(names, line.split(",")):
            cols[n].append(cell)
    return units, cols


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
