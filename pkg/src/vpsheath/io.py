"""CSV emission and parsing.

Floats are written with ``repr`` (shortest round-trip decimal), so a parsed
file reproduces the in-memory arrays bit for bit.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

FIELD_HEADER = ("t", "x", "xi", "value")
PROFILE_HEADER = ("t", "x", "value")
ERROR_HEADER = ("epsilon", "t", "l2_f", "linf_f", "l2_phi", "linf_phi")


def fmt(v) -> str:
    return repr(float(v))


def write_rows(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return path


def write_field(path, t: float, x, xi, values) -> Path:
    """Field file: one row per (x, xi) pair, x outermost."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(x), len(xi)):
        raise ValueError(f"field shape {values.shape} does not match grid {(len(x), len(xi))}")
    rows = ((t, xv, xiv, values[i, k]) for i, xv in enumerate(x) for k, xiv in enumerate(xi))
    return write_rows(path, FIELD_HEADER, rows)


def write_profile(path, t: float, x, values) -> Path:
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != x.shape:
        raise ValueError("profile values and grid differ in shape")
    return write_rows(path, PROFILE_HEADER, ((t, a, b) for a, b in zip(x, values)))


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def read_field(path):
    """Return (t, x, xi, values) of a field file written by ``write_field``."""
    header, data = read_table(path)
    if tuple(header) != FIELD_HEADER:
        raise ValueError(f"{path}: not a field file")
    x = np.unique(data[:, 1])
    xi = np.unique(data[:, 2])
    return data[0, 0], x, xi, data[:, 3].reshape(len(x), len(xi))


def read_profile(path):
    header, data = read_table(path)
    if tuple(header) != PROFILE_HEADER:
        raise ValueError(f"{path}: not a profile file")
    return data[0, 0], data[:, 1], data[:, 2]
