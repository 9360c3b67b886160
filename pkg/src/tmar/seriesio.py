"""Dataset ingestion, config parsing, and delimited result files.

All numeric text is written with 17 significant digits so that files
round-trip float64 exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, UsageError

FLOAT_FMT = "%.17g"


@dataclass
class SeriesData:
    values: np.ndarray
    source: str
    transform: str = "none"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) < 10:
            raise DataError(f"series too short: {len(self.values)} < 10 values")
        if not np.all(np.isfinite(self.values)):
            raise DataError("series contains non-finite values")

    @property
    def n(self) -> int:
        return len(self.values)


def load_series(path, column: int | None = None, transform: str = "none") -> SeriesData:
    """Parse one-value-per-line or delimited-column numeric text.

    `column` selects a 0-based field in delimited rows (whitespace or
    comma); `transform='diff'` replaces the series by first differences.
    Non-numeric rows are rejected with their line number.
    """
    if transform not in ("none", "diff"):
        raise UsageError(f"unknown transform {transform!r}")
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    values = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.replace(",", " ").split()
            idx = 0 if column is None else column
            if idx >= len(fields):
                raise DataError(f"line {lineno}: no column {idx}")
            try:
                values.append(float(fields[idx]))
            except ValueError:
                raise DataError(
                    f"line {lineno}: non-numeric value {fields[idx]!r}"
                ) from None
    if len(values) < 10:
        raise DataError(f"fewer than 10 numeric values in {path}")
    arr = np.asarray(values)
    if transform == "diff":
        arr = np.diff(arr)
    return SeriesData(arr, source=str(path), transform=transform)


def write_series(path, values):
    with open(path, "w") as fh:
        for v in np.asarray(values, dtype=float):
            fh.write((FLOAT_FMT % v) + "\n")


def parse_config(path) -> dict:
    """Flat `key = value` text with # comments; values stay strings."""
    if not os.path.exists(path):
        raise UsageError(f"no such config file: {path}")
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_keyvalues(path, mapping: dict):
    with open(path, "w") as fh:
        for key, value in mapping.items():
            if isinstance(value, float):
                value = FLOAT_FMT % value
            fh.write(f"{key} = {value}\n")


def write_trace(path, trace):
    """Delimited trace: header row of parameter names, one row per draw."""
    names = trace.parameter_names()
    matrix = trace.as_matrix()
    with open(path, "w") as fh:
        fh.write("iter," + ",".join(names) + "\n")
        for j in range(matrix.shape[0]):
            fh.write(
                str(j + 1) + "," + ",".join(FLOAT_FMT % v for v in matrix[j]) + "\n"
            )


def read_trace(path) -> tuple:
    """Read a trace file back as (names, matrix), dropping the iter column."""
    if not os.path.exists(path):
        raise DataError(f"no such trace file: {path}")
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise DataError(f"empty trace file: {path}")
        names = header.split(",")
        rows = []
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed trace row") from None
    if not rows:
        raise DataError(f"trace file has no draws: {path}")
    matrix = np.asarray(rows)
    if names[0] == "iter":
        names = names[1:]
        matrix = matrix[:, 1:]
    return names, matrix
