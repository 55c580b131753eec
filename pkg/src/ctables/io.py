"""Serialization of tables, sample streams, counts and reports.

Counts are written as decimal strings because they overflow 64 bits quickly.
The binary stream is a sequence of frames, each a little-endian ``uint32``
header ``m, n`` followed by ``m*n`` little-endian ``int32`` entries.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
from pathlib import Path
from typing import Iterable, List

import numpy as np

from .core import Margins, Table, as_entries, make_table

_HEADER = struct.Struct("<II")
INT32_MAX = np.iinfo(np.int32).max


def count_to_str(count: int) -> str:
    return str(int(count))


def count_from_str(text: str) -> int:
    text = text.strip()
    if not text.isdigit():
        raise ValueError(f"not a decimal count: {text!r}")
    return int(text)


# --------------------------------------------------------------------------- single tables


def table_to_dict(t: Table) -> dict:
    m, n = t.shape
    return {"m": m, "n": n, "row": list(t.margins.row), "col": list(t.margins.col), "entries": t.tolist()}


def table_from_dict(d: dict) -> Table:
    margins = Margins(d["row"], d["col"])
    t = Table(d["entries"], margins)
    if t.shape != (d["m"], d["n"]):
        raise ValueError("declared shape does not match entries")
    return t


def table_to_csv(t: Table) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(t.tolist())
    return buf.getvalue()


def table_from_csv(text: str) -> Table:
    rows = [[int(v) for v in r] for r in csv.reader(io.StringIO(text)) if r]
    return make_table(rows)


# --------------------------------------------------------------------------- streams


def _check_range(arr: np.ndarray):
    if arr.size and (arr.min() < 0 or arr.max() > INT32_MAX):
        raise ValueError("entries do not fit in int32")


def write_stream_csv(path, tables) -> int:
    """One flattened table per line; returns the number of tables written."""
    arr = as_entries(tables)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for x in arr:
            w.writerow(x.ravel().tolist())
    return len(arr)


def read_stream_csv(path, shape) -> np.ndarray:
    m, n = shape
    with open(path, newline="") as fh:
        rows = [list(map(int, r)) for r in csv.reader(fh) if r]
    arr = np.array(rows, dtype=np.int64).reshape(-1, m * n) if rows else np.empty((0, m * n), dtype=np.int64)
    return arr.reshape(-1, m, n)


def write_stream_bin(path, tables) -> int:
    arr = as_entries(tables)
    _check_range(arr)
    with open(path, "wb") as fh:
        for x in arr:
            fh.write(_HEADER.pack(*x.shape))
            fh.write(x.astype("<i4").tobytes())
    return len(arr)


def read_stream_bin(path) -> List[np.ndarray]:
    """Read every frame; frames may have different shapes, so a list is returned."""
    data = Path(path).read_bytes()
    out = []
    pos = 0
    while pos < len(data):
        if pos + _HEADER.size > len(data):
            raise ValueError("truncated frame header")
        m, n = _HEADER.unpack_from(data, pos)
        pos += _HEADER.size
        size = 4 * m * n
        if pos + size > len(data):
            raise ValueError("truncated frame body")
        out.append(np.frombuffer(data, dtype="<i4", count=m * n, offset=pos).astype(np.int64).reshape(m, n))
        pos += size
    return out


def write_stream_json(path, tables: Iterable) -> int:
    arr = as_entries(tables)
    docs = [table_to_dict(make_table(x)) for x in arr]
    dump_json(path, docs)
    return len(docs)


def write_stream(path, tables, fmt: str) -> int:
    if fmt == "csv":
        return write_stream_csv(path, tables)
    if fmt == "bin":
        return write_stream_bin(path, tables)
    if fmt == "json":
        return write_stream_json(path, tables)
    raise ValueError(f"unknown format {fmt!r}")


def write_two_column_csv(path, rows, header=("x", "y")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in rows:
            w.writerow([repr(a) if isinstance(a, float) else a, repr(b) if isinstance(b, float) else b])


# --------------------------------------------------------------------------- json


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(obj, default=_default, sort_keys=True, indent=2, allow_nan=True) + "\n"


def dump_json(path, obj) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(dumps(obj))
    os.replace(tmp, path)
