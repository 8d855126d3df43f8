"""Plain CSV tables: '#' comment lines, one header row, numeric columns."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np


class TableError(ValueError):
    """Malformed or unreadable table."""


def write_table(path, columns: dict[str, np.ndarray], comments=()) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(names) + "\n")
    for row in data:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_table(path) -> tuple[dict[str, np.ndarray], list[str]]:
    """Columns by header name and the comment lines (without '#')."""
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise TableError(f"{path}: cannot read ({exc})") from None
    comments, body = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            comments.append(s[1:].strip())
        else:
            body.append((lineno, s))
    if not body:
        raise TableError(f"{path}: no header row")
    header_line, header = body[0]
    names = [h.strip() for h in next(csv.reader([header]))]
    if len(set(names)) != len(names) or any(not n for n in names):
        raise TableError(f"{path}:{header_line}: bad header {header!r}")
    rows = []
    for lineno, s in body[1:]:
        fields = next(csv.reader([s]))
        if len(fields) != len(names):
            raise TableError(f"{path}:{lineno}: expected {len(names)} fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise TableError(f"{path}:{lineno}: non-numeric field in {s!r}") from None
    if not rows:
        raise TableError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise TableError(f"{path}: non-finite values")
    return {k: arr[:, i] for i, k in enumerate(names)}, comments
