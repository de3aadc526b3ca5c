"""Results CSV persistence and the per-method summary table."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .sweep import SweepRecord

COLUMNS = ("loss", "ssl", "scorer", "axis", "axis_value", "auroc", "id_accuracy", "seed",
           "wall_time_s")
_FLOATS = {"axis_value", "auroc", "id_accuracy", "wall_time_s"}


class SchemaError(ValueError):
    def __init__(self, column: str, msg: str):
        super().__init__(f"results column {column!r}: {msg}")
        self.column = column


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_results(records, path, append: bool = False) -> None:
    path = Path(path)
    new_file = not (append and path.exists() and path.stat().st_size > 0)
    if not new_file:
        read_results(path)  # refuse to append to a file with another schema
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if new_file:
            w.writerow(COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) if c in _FLOATS else getattr(r, c) for c in COLUMNS])


def read_results(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError("<header>", "file is empty")
        for i, col in enumerate(COLUMNS):
            if i >= len(header):
                raise SchemaError(col, "missing")
            if header[i] != col:
                raise SchemaError(col, f"expected at position {i}, found {header[i]!r}")
        if len(header) > len(COLUMNS):
            raise SchemaError(header[len(COLUMNS)], "unexpected extra column")
        out = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(COLUMNS):
                raise SchemaError(COLUMNS[min(len(row), len(COLUMNS) - 1)],
                                  f"line {lineno} has {len(row)} fields")
            kw = {}
            for col, raw in zip(COLUMNS, row):
                try:
                    kw[col] = float(raw) if col in _FLOATS else int(raw) if col == "seed" else raw
                except ValueError:
                    raise SchemaError(col, f"line {lineno}: cannot parse {raw!r}") from None
            out.append(SweepRecord(**kw))
    return out


def summarize(records) -> tuple[list[str], list[float], np.ndarray]:
    """Mean AUROC over seeds, as (method labels, axis values, table[axis, method])."""
    cells = defaultdict(list)
    for r in records:
        method = r.loss if r.ssl == "none" else f"{r.loss}+{r.ssl}"
        cells[(f"{method}/{r.scorer}", r.axis_value)].append(r.auroc)
    methods = sorted({m for m, _ in cells})
    axis = sorted({a for _, a in cells})
    table = np.full((len(axis), len(methods)), np.nan)
    for (m, a), vals in cells.items():
        table[axis.index(a), methods.index(m)] = float(np.mean(vals))
    return methods, axis, table


def format_summary(records) -> str:
    methods, axis, table = summarize(records)
    axis_name = records[0].axis if records else "axis"
    width = max([10] + [len(m) for m in methods])
    lines = [f"{axis_name:>8} " + " ".join(f"{m:>{width}}" for m in methods)]
    for i, a in enumerate(axis):
        cells = " ".join(f"{v:>{width}.4f}" if np.isfinite(v) else f"{'-':>{width}}"
                         for v in table[i])
        lines.append(f"{a:>8.3g} {cells}")
    return "\n".join(lines)
