"""Run-off triangles of cumulative claims.

Rows are accident years (oldest first), columns development periods, both
0-based. A square triangle with ``A`` accident years observes cell ``(a, d)``
iff ``a + d <= A - 1``. Unobserved cells are stored as NaN and never
participate in any computation.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    NonNumericCell,
    NonPositiveCell,
    NonSquare,
    RaggedShapeMismatch,
    ShapeMismatch,
)

__all__ = [
    "DevTriangle",
    "check_triangle",
    "diagonal",
    "factor_grid",
    "parse_triangle",
    "read_triangle",
    "serialize_triangle",
    "upper_mask",
]


def upper_mask(n_periods: int) -> np.ndarray:
    """Boolean mask of the observed cells of an ``n_periods`` square triangle."""
    idx = np.arange(n_periods)
    return idx[:, None] + idx[None, :] <= n_periods - 1


@dataclass(frozen=True, eq=False)
class DevTriangle:
    """Immutable square upper triangle of strictly positive cumulative claims.

    ``values`` is an ``(A, A)`` read-only float array with NaN below the
    anti-diagonal. Use :meth:`from_rows` or :func:`check_triangle` to build
    one; the constructor validates either way.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise NonSquare(f"triangle must be a non-empty square array, got shape {arr.shape}")
        mask = upper_mask(arr.shape[0])
        obs = arr[mask]
        if not np.all(np.isfinite(obs)):
            raise NonNumericCell("observed cells must be finite")
        if np.any(obs <= 0):
            a, d = np.argwhere(mask & (arr <= 0))[0]
            raise NonPositiveCell("cumulative claims must be > 0", int(a), int(d))
        arr[~mask] = np.nan
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "DevTriangle":
        rows = [list(map(float, r)) for r in rows]
        n = len(rows)
        for a, r in enumerate(rows):
            if len(r) != n - a:
                raise RaggedShapeMismatch(f"row must have {n - a} cells, got {len(r)}", a)
        arr = np.full((n, n), np.nan)
        for a, r in enumerate(rows):
            arr[a, : n - a] = r
        return cls(arr)

    @classmethod
    def from_full(cls, full: np.ndarray) -> "DevTriangle":
        """Upper part of a fully realized ``(A, A)`` claims rectangle."""
        full = np.asarray(full, dtype=float)
        arr = np.where(upper_mask(full.shape[0]), full, np.nan)
        return cls(arr)

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def rows(self) -> list[np.ndarray]:
        n = self.n_periods
        return [self.values[a, : n - a] for a in range(n)]

    @property
    def latest(self) -> np.ndarray:
        return diagonal(self)

    def __len__(self):
        return self.n_periods

    def __eq__(self, other):
        if not isinstance(other, DevTriangle):
            return NotImplemented
        return self.values.shape == other.values.shape and np.array_equal(
            self.values, other.values, equal_nan=True
        )

    def __repr__(self):
        return f"DevTriangle(n_periods={self.n_periods})"


def check_triangle(X) -> DevTriangle:
    """Coerce ``X`` to a :class:`DevTriangle`.

    Accepts a triangle, a square array with NaN in the unobserved part (the
    lower part is ignored, so a full rectangle also works), or a ragged list
    of rows.
    """
    if isinstance(X, DevTriangle):
        return X
    if isinstance(X, np.ndarray):
        return DevTriangle.from_full(X)
    rows = list(X)
    if rows and all(np.ndim(r) == 1 for r in rows):
        lengths = [len(r) for r in rows]
        if lengths == [len(rows) - a for a in range(len(rows))]:
            return DevTriangle.from_rows(rows)
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ShapeMismatch(f"cannot interpret input as a triangle: {exc}") from None
    return DevTriangle.from_full(arr)


def diagonal(tri: DevTriangle) -> np.ndarray:
    """Latest observed claim per accident year; entry ``a`` is ``C[a, A-1-a]``."""
    n = tri.n_periods
    idx = np.arange(n)
    return tri.values[idx, n - 1 - idx].copy()


def factor_grid(tri: DevTriangle) -> list[np.ndarray]:
    """Observed individual development factors, one array per column.

    Column ``d`` holds ``C[a, d+1] / C[a, d]`` for ``a = 0 .. A-2-d``.
    """
    v = tri.values
    n = tri.n_periods
    return [v[: n - 1 - d, d + 1] / v[: n - 1 - d, d] for d in range(n - 1)]


def parse_triangle(text: str, header: bool = False) -> DevTriangle:
    reader = csv.reader(io.StringIO(text))
    raw = [r for r in reader]
    if header and raw:
        raw = raw[1:]
    while raw and all(not c.strip() for c in raw[-1]):
        raw.pop()
    if not raw:
        raise NonSquare("empty triangle")
    n = len(raw)
    width = len(raw[0])
    if width != n:
        raise NonSquare(f"{n} accident years but {width} development columns")

    rows = []
    for a, fields in enumerate(raw):
        cells = [c.strip() for c in fields]
        while cells and not cells[-1]:
            cells.pop()
        if len(fields) > n and any(c.strip() for c in fields[n:]):
            raise NonSquare(f"more than {n} development columns", a)
        vals = []
        for d, c in enumerate(cells):
            if not c:
                raise RaggedShapeMismatch("empty cell inside the observed part", a, d)
            try:
                x = float(c)
            except ValueError:
                raise NonNumericCell(f"not a number: {c!r}", a, d) from None
            if not math.isfinite(x):
                raise NonNumericCell(f"not a finite number: {c!r}", a, d)
            if x <= 0:
                raise NonPositiveCell(f"cumulative claims must be > 0, got {c}", a, d)
            vals.append(x)
        if len(vals) != n - a:
            raise RaggedShapeMismatch(f"row must have {n - a} cells, got {len(vals)}", a)
        rows.append(vals)
    return DevTriangle.from_rows(rows)


def read_triangle(path, header: bool = False) -> DevTriangle:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_triangle(fh.read(), header=header)


def serialize_triangle(tri: DevTriangle) -> str:
    n = tri.n_periods
    lines = []
    for a, row in enumerate(tri.rows):
        cells = [format(float(x), ".17g") for x in row] + [""] * a
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
