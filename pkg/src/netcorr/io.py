"""
Readers and writers for the on-disk formats.

Edge list
    Plain text, one undirected edge per line: two 0-based integer node ids
    separated by whitespace and/or a single comma.  Blank lines and lines
    whose first non-blank character is ``#`` are ignored.

Attribute table
    CSV with a header row.  An ``id`` column holds node ids; the ids must be
    exactly ``0 .. n-1`` in any order, with ``n`` the number of data rows.
    Other columns are variables.

Coordinate table
    CSV with a header row starting ``id,x,y``; further columns are extra
    coordinate dimensions.  Ids follow the attribute-table rule.

Floats are written with ``repr`` so files round-trip exactly and identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

__all__ = [
    "read_attribute",
    "read_coordinates",
    "read_edges",
    "write_attributes",
    "write_coordinates",
    "write_edges",
]

_SPLIT = re.compile(r"\s*,\s*|\s+")


def read_edges(path) -> np.ndarray:
    """Edge list as an ``(E, 2)`` integer array."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = _SPLIT.split(text)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two node ids, got {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: node ids must be integers, got {text!r}") from None
            edges.append((i, j))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if "id" not in header:
        raise ValueError(f"{path}: header must contain an 'id' column")
    for k, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{k}: expected {len(header)} fields, got {len(row)}")
    return header, rows


def _order(path, header, rows) -> np.ndarray:
    col = header.index("id")
    try:
        ids = np.array([int(row[col]) for row in rows], dtype=np.int64)
    except ValueError:
        raise ValueError(f"{path}: ids must be integers") from None
    n = len(ids)
    seen = np.zeros(n, dtype=bool)
    for i in ids:
        if i < 0 or i >= n:
            raise ValueError(f"{path}: id {i} outside 0..{n - 1}; every node id must appear exactly once")
        if seen[i]:
            raise ValueError(f"{path}: duplicate id {i}")
        seen[i] = True
    return np.argsort(ids)


def read_attribute(path, column: str) -> list[str]:
    """One variable from an attribute table, ordered by node id, as raw strings."""
    header, rows = _read_table(path)
    if column not in header:
        raise ValueError(f"{path}: no column {column!r}; available: {', '.join(h for h in header if h != 'id')}")
    order = _order(path, header, rows)
    col = header.index(column)
    values = [rows[k][col].strip() for k in order]
    if any(v == "" for v in values):
        raise ValueError(f"{path}: column {column!r} has missing values")
    return values


def read_coordinates(path) -> np.ndarray:
    """Coordinates ordered by node id, shape ``(n, dim)``."""
    header, rows = _read_table(path)
    if header[:3] != ["id", "x", "y"]:
        raise ValueError(f"{path}: coordinate header must start with id,x,y")
    order = _order(path, header, rows)
    try:
        coords = np.array([[float(v) for v in row[1:]] for row in rows], dtype=np.float64)
    except ValueError:
        raise ValueError(f"{path}: coordinates must be numeric") from None
    return coords[order]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_edges(path, W) -> None:
    """Write the upper triangle of a symmetric adjacency as an edge list."""
    rows, cols, _ = W.triplets()
    keep = rows < cols
    with open(path, "w") as fh:
        fh.write(f"# undirected edges, n={W.n}\n")
        for i, j in zip(rows[keep], cols[keep]):
            fh.write(f"{i} {j}\n")


def write_attributes(path, columns: dict) -> None:
    """Write an attribute table; ``columns`` maps names to equal-length arrays."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *names])
        for i in range(n):
            writer.writerow([i, *(_fmt(columns[c][i]) for c in names)])


def write_coordinates(path, coords) -> None:
    coords = np.asarray(coords, dtype=np.float64)
    extra = [f"x{k}" for k in range(2, coords.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "x", "y", *extra])
        for i, row in enumerate(coords):
            writer.writerow([i, *(_fmt(v) for v in row)])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
