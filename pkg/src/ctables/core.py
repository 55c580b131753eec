"""Margins, tables, swap moves and validity checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import StructuralError


class OutsideHypothesisWarning(UserWarning):
    """Uniform density C = 1 lies outside the C >= 2 regime where the limit laws are stated."""


def _as_int_tuple(values, name) -> tuple:
    out = []
    for v in values:
        iv = int(v)
        if iv != v:
            raise ValueError(f"{name} entries must be integers, got {v!r}")
        if iv < 0:
            raise ValueError(f"{name} entries must be non-negative, got {iv}")
        out.append(iv)
    return tuple(out)


@dataclass(frozen=True)
class Margins:
    """Row and column sums of an ``m x n`` table.

    Zero entries are allowed; the counting recursions produce them.
    """

    row: tuple
    col: tuple

    def __post_init__(self):
        row = _as_int_tuple(self.row, "row")
        col = _as_int_tuple(self.col, "col")
        if not row or not col:
            raise ValueError("margins must have at least one row and one column")
        if sum(row) != sum(col):
            raise ValueError(f"row total {sum(row)} != column total {sum(col)}")
        object.__setattr__(self, "row", row)
        object.__setattr__(self, "col", col)

    @classmethod
    def uniform(cls, n: int, C: int, warn: bool = True) -> "Margins":
        """Square margins with every line summing to ``C * n``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if C < 1:
            raise ValueError("C must be >= 1")
        if C == 1 and warn:
            warnings.warn(
                "C = 1 is outside the C >= 2 hypothesis of the limit laws",
                OutsideHypothesisWarning,
                stacklevel=2,
            )
        return cls((C * n,) * n, (C * n,) * n)

    @property
    def m(self) -> int:
        return len(self.row)

    @property
    def n(self) -> int:
        return len(self.col)

    @property
    def shape(self) -> tuple:
        return (self.m, self.n)

    @property
    def total(self) -> int:
        return sum(self.row)

    @property
    def density(self) -> Optional[int]:
        """``C`` when these are uniform square margins ``C*n``, else ``None``."""
        if self.m != self.n or len(set(self.row) | set(self.col)) != 1:
            return None
        line = self.row[0]
        if line % self.n:
            return None
        return line // self.n

    @property
    def outside_hypothesis(self) -> bool:
        return self.density == 1

    def transpose(self) -> "Margins":
        return Margins(self.col, self.row)

    def to_dict(self) -> dict:
        return {"row": list(self.row), "col": list(self.col)}


@dataclass(frozen=True, eq=False)
class Table:
    """A non-negative integer matrix paired with the margins it is meant to meet.

    Construction checks shapes only; use :func:`validate_table` for the sums.
    The stored array is read-only.
    """

    entries: np.ndarray
    margins: Margins

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.int64, copy=True)
        if arr.ndim != 2:
            raise StructuralError(f"entries must be 2-D, got shape {arr.shape}")
        if arr.shape != self.margins.shape:
            raise StructuralError(
                f"entries shape {arr.shape} does not match margins {self.margins.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def shape(self):
        return self.entries.shape

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        return self.margins == other.margins and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.margins, self.entries.tobytes()))

    def __repr__(self):
        return f"Table({self.entries.tolist()}, row={self.margins.row}, col={self.margins.col})"

    def transpose(self) -> "Table":
        return Table(self.entries.T, self.margins.transpose())

    def tolist(self) -> list:
        return self.entries.tolist()


def make_table(entries, margins: Optional[Margins] = None) -> Table:
    """Build a table; when ``margins`` is omitted they are read off the entries."""
    arr = np.asarray(entries, dtype=np.int64)
    if margins is None:
        margins = Margins(arr.sum(axis=1), arr.sum(axis=0))
    return Table(arr, margins)


@dataclass(frozen=True)
class SwapMove:
    """Add ``sign`` at (i, j) and (i2, j2), subtract it at (i, j2) and (i2, j).

    Indices are zero-based.
    """

    i: int
    i2: int
    j: int
    j2: int
    sign: int = 1

    def __post_init__(self):
        if self.i == self.i2 or self.j == self.j2:
            raise StructuralError("swap move needs two distinct rows and two distinct columns")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    def reversed(self) -> "SwapMove":
        return SwapMove(self.i, self.i2, self.j, self.j2, -self.sign)


def validate_table(t: Table) -> bool:
    """True iff every entry is >= 0 and every line sum matches the margins."""
    x = t.entries
    if x.shape != t.margins.shape:
        raise StructuralError(f"entries shape {x.shape} does not match margins {t.margins.shape}")
    if (x < 0).any():
        return False
    return (
        tuple(x.sum(axis=1).tolist()) == t.margins.row
        and tuple(x.sum(axis=0).tolist()) == t.margins.col
    )


def apply_swap(t: Table, s: SwapMove) -> Optional[Table]:
    """The moved table, or ``None`` when an entry would go negative."""
    m, n = t.shape
    for idx, bound in ((s.i, m), (s.i2, m), (s.j, n), (s.j2, n)):
        if not 0 <= idx < bound:
            raise StructuralError(f"swap index {idx} out of range for table of shape {t.shape}")
    x = t.entries.copy()
    x[s.i, s.j] += s.sign
    x[s.i2, s.j2] += s.sign
    x[s.i, s.j2] -= s.sign
    x[s.i2, s.j] -= s.sign
    if min(x[s.i, s.j], x[s.i2, s.j2], x[s.i, s.j2], x[s.i2, s.j]) < 0:
        return None
    return Table(x, t.margins)


def row_sum_identity_residual(t: Table) -> int:
    """``sum_{j>=2} X_1j - C(n-1)``; equal to ``C - X_11`` for a valid table."""
    C = t.margins.density
    if C is None:
        raise ValueError("row-sum identity applies to uniform-margin tables only")
    n = t.margins.n
    return int(t.entries[0, 1:].sum()) - C * (n - 1)


def northwest_start(margins: Margins) -> Table:
    """Greedy northwest-corner filling; always yields a valid table."""
    rows = list(margins.row)
    cols = list(margins.col)
    x = np.zeros(margins.shape, dtype=np.int64)
    i = j = 0
    while i < margins.m and j < margins.n:
        v = min(rows[i], cols[j])
        x[i, j] = v
        rows[i] -= v
        cols[j] -= v
        if rows[i] == 0 and i < margins.m - 1:
            i += 1
        elif cols[j] == 0:
            j += 1
        else:
            i += 1
    return Table(x, margins)


def balanced_vector(total: int, length: int) -> tuple:
    """``total`` split into ``length`` near-equal parts, larger parts first."""
    q, rem = divmod(total, length)
    return (q + 1,) * rem + (q,) * (length - rem)


def as_entries(samples) -> np.ndarray:
    """Stack tables (or a ready array) into an ``(S, m, n)`` integer array."""
    if isinstance(samples, np.ndarray):
        arr = samples
        if arr.ndim == 2:
            arr = arr[None]
        return arr
    seq: Sequence = list(samples)
    if not seq:
        return np.zeros((0, 0, 0), dtype=np.int64)
    return np.stack([s.entries if isinstance(s, Table) else np.asarray(s) for s in seq])
