"""CSV input, report serialization and atomic file output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from maxperm.errors import InputError

__all__ = ["Table", "read_csv", "format_float", "rows_to_csv", "to_json", "atomic_write"]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Table:
    """Numeric columns of a CSV file, keyed by header name."""

    header: tuple[str, ...]
    columns: dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise InputError(f"unknown column {name!r}; available: {list(self.header)}")
        return self.columns[name]


def read_csv(path, usecols=None) -> Table:
    """Read a comma-separated file with a header row into float columns.

    Only ``usecols`` (all columns when ``None``) are parsed.  Empty cells and
    NA markers in used columns are a hard error listing the offending rows
    (1-based data rows, header excluded).
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = tuple(h.strip() for h in next(reader))
            except StopIteration:
                raise InputError(f"{path}: empty file, header row required") from None
            records = list(reader)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except (csv.Error, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: malformed CSV: {exc}") from exc
    if len(set(header)) != len(header):
        raise InputError(f"{path}: duplicate column names in header")
    wanted = list(header) if usecols is None else list(usecols)
    for name in wanted:
        if name not in header:
            raise InputError(f"unknown column {name!r}; available: {list(header)}")
    idx = {h: i for i, h in enumerate(header)}
    records = [r for r in records if any(cell.strip() for cell in r)]
    missing: dict[str, list[int]] = {}
    cols: dict[str, list[float]] = {name: [] for name in wanted}
    for row_no, rec in enumerate(records, start=1):
        if len(rec) != len(header):
            raise InputError(f"{path}: line {row_no + 1} has {len(rec)} fields, expected {len(header)}")
        for name in wanted:
            cell = rec[idx[name]].strip()
            if cell == "" or cell.upper() in ("NA", "NAN", "NULL"):
                missing.setdefault(name, []).append(row_no)
                continue
            try:
                value = float(cell)
            except ValueError:
                raise InputError(
                    f"{path}: line {row_no + 1}, column {idx[name] + 1} ({name!r}): not a number: {cell!r}"
                ) from None
            if not math.isfinite(value):
                missing.setdefault(name, []).append(row_no)
                continue
            cols[name].append(value)
    if missing:
        detail = "; ".join(f"{k}: rows {v}" for k, v in missing.items())
        raise InputError(f"{path}: missing values ({detail})")
    if not records:
        raise InputError(f"{path}: no data rows")
    return Table(header, {k: np.asarray(v) for k, v in cols.items()})


def format_float(v) -> str:
    """17 significant digits: parses back to the identical double."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    if not rows:
        return ""
    columns = columns or list(rows[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(row.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # JSON has no inf/nan literals
        return v if math.isfinite(v) else str(v)
    return v


def to_json(doc: dict) -> str:
    """Deterministic JSON; floats use Python's shortest round-trip repr."""
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
