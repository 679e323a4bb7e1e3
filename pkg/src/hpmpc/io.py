"""Versioned CSV tables and canonical JSON documents.

Tables start with one metadata comment line::

    # hpmpc-table version=1.0 kind=trace-hourly digest=0123abcd seed=7

followed by a mandatory header row.  Time columns hold ISO-8601 stamps.
Readers accept files without the metadata line (raw measurement exports)
but reject tables of an unknown major version.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from datetime import datetime, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "BASE_TIME",
    "SCHEMA_VERSION",
    "SchemaError",
    "Table",
    "canonical_json",
    "config_digest",
    "from_iso",
    "read_table",
    "to_iso",
    "write_json",
    "write_table",
]

SCHEMA_VERSION = "1.0"
BASE_TIME = datetime(2023, 1, 2)
TEXT_COLUMNS = {"timestamp", "date", "status", "direction"}


class SchemaError(ValueError):
    """Input file does not follow the expected layout."""


def to_iso(seconds: float) -> str:
    return (BASE_TIME + timedelta(seconds=float(seconds))).isoformat()


def from_iso(stamp: str) -> float:
    return (datetime.fromisoformat(stamp) - BASE_TIME).total_seconds()


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_digest(obj) -> str:
    text = json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_json(path: Path | str, obj) -> None:
    Path(path).write_text(canonical_json(obj))


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".10g")


def write_table(path: Path | str, columns: Mapping[str, Sequence], kind: str,
                digest: str = "-", seed: int | str = "-") -> None:
    names = list(columns)
    n = {len(columns[k]) for k in names}
    if len(n) > 1:
        raise ValueError("table columns differ in length")
    with open(path, "w", newline="") as fh:
        fh.write(f"# hpmpc-table version={SCHEMA_VERSION} kind={kind} digest={digest} seed={seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*(columns[k] for k in names)):
            w.writerow([_cell(v) for v in row])


class Table(dict):
    """Column mapping plus the parsed metadata line in ``meta``."""

    meta: dict


def read_table(path: Path | str, required: Sequence[str] = (), kind: str | None = None) -> Table:
    """Read a table; numeric columns become float arrays.

    Raises :class:`SchemaError` naming the row and column of the first
    unparsable cell, a missing required column or a version mismatch.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc.strerror})") from None
    meta: dict[str, str] = {}
    if lines and lines[0].startswith("#"):
        for token in lines[0].lstrip("#").split()[1:]:
            key, _, value = token.partition("=")
            meta[key] = value
        lines = lines[1:]
        major = meta.get("version", "").split(".")[0]
        if major != SCHEMA_VERSION.split(".")[0]:
            raise SchemaError(f"{path}: unsupported table version {meta.get('version')!r}")
        if kind is not None and meta.get("kind") not in (None, kind):
            raise SchemaError(f"{path}: expected a {kind} table, found {meta.get('kind')}")
    if not lines:
        raise SchemaError(f"{path}: header row missing")
    rows = list(csv.reader(lines))
    header = rows[0]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    out = Table()
    out.meta = meta
    for j, name in enumerate(header):
        values = []
        for i, row in enumerate(rows[1:], start=2 + bool(meta)):
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {i} has {len(row)} fields, header has {len(header)}")
            values.append(row[j])
        if name in TEXT_COLUMNS:
            out[name] = values
            continue
        try:
            out[name] = np.array([float(v) if v != "" else np.nan for v in values])
        except ValueError:
            bad = next(k for k, v in enumerate(values) if not _is_float(v))
            raise SchemaError(f"{path}: line {bad + 2 + bool(meta)}, column {name!r}: "
                              f"cannot parse {values[bad]!r} as a number") from None
    return out


def _is_float(v: str) -> bool:
    try:
        float(v)
    except ValueError:
        return v == ""
    return True
