"""Sampling patterns, noise budgets, entry removals, and the derived constraint columns.

A sampling pattern is a d-by-N binary observation mask stored as an explicit
set of (row, col) cells.  From a pattern and a rank r we derive a binary
"constraint matrix": for every data column with l observed rows
x_1 < ... < x_l it contributes max(l - r, 0) columns, the j-th carrying ones
exactly at rows {x_1, ..., x_r, x_{r+j}}.  All certificate machinery operates
on these columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Iterator

Cell = tuple[int, int]


class PatternFormatError(ValueError):
    """Raised when a pattern or observation file violates the text format."""


@dataclass(frozen=True)
class SamplingPattern:
    """Binary d-by-N observation mask as an explicit set of zero-based cells."""

    d: int
    N: int
    observed: frozenset[Cell]

    def __post_init__(self):
        if self.d <= 0 or self.N <= 0:
            raise ValueError("pattern dimensions must be positive")
        object.__setattr__(self, "observed", frozenset(self.observed))
        for i, j in self.observed:
            if not (0 <= i < self.d and 0 <= j < self.N):
                raise ValueError(f"cell ({i}, {j}) outside a {self.d}x{self.N} grid")

    @classmethod
    def from_cells(cls, d: int, N: int, cells: Iterable[Cell]) -> "SamplingPattern":
        cells = list(cells)
        if len(set(cells)) != len(cells):
            raise ValueError("duplicate observed cells")
        return cls(d, N, frozenset(cells))

    @classmethod
    def full(cls, d: int, N: int) -> "SamplingPattern":
        return cls(d, N, frozenset((i, j) for i in range(d) for j in range(N)))

    def cells(self) -> tuple[Cell, ...]:
        """Observed cells in canonical ascending (row, col) order."""
        return tuple(sorted(self.observed))

    def column_rows(self, j: int) -> tuple[int, ...]:
        """Observed row indices of column j, ascending."""
        return tuple(sorted(i for i, c in self.observed if c == j))

    def column_counts(self) -> list[int]:
        counts = [0] * self.N
        for _, j in self.observed:
            counts[j] += 1
        return counts


@dataclass(frozen=True)
class RemovalSet:
    """A set of cells to delete from a parent pattern (a hypothesized noise support)."""

    cells: frozenset[Cell]

    def __post_init__(self):
        object.__setattr__(self, "cells", frozenset(self.cells))

    def sorted_cells(self) -> tuple[Cell, ...]:
        return tuple(sorted(self.cells))


GLOBAL = "global"
PER_COLUMN = "per_column"


@dataclass(frozen=True)
class NoiseBudget:
    """Sparse-noise budget: at most `amount` corrupted cells, globally or per column."""

    kind: str
    amount: int

    def __post_init__(self):
        if self.kind not in (GLOBAL, PER_COLUMN):
            raise ValueError(f"unknown budget kind {self.kind!r}")
        if self.amount < 0:
            raise ValueError("budget amount must be non-negative")

    @classmethod
    def global_noise(cls, s: int) -> "NoiseBudget":
        return cls(GLOBAL, s)

    @classmethod
    def per_column(cls, g: int) -> "NoiseBudget":
        return cls(PER_COLUMN, g)

    def describe(self) -> str:
        return f"{'global' if self.kind == GLOBAL else 'percolumn'}:{self.amount}"


@dataclass(frozen=True)
class ConstraintMatrix:
    """Binary columns with exactly r+1 ones each, tagged with their source column.

    Columns are ordered by source column ascending, then by the extra row
    ascending, which makes every downstream certificate deterministic.
    """

    d: int
    r: int
    columns: tuple[tuple[int, ...], ...]  # sorted row supports, each of size r+1
    origins: tuple[int, ...]              # source data column per constraint column
    extras: tuple[int, ...]               # the row distinguishing the column within its origin

    def __len__(self) -> int:
        return len(self.columns)

    def row_mask(self, index: int) -> int:
        mask = 0
        for row in self.columns[index]:
            mask |= 1 << row
        return mask

    def origin_groups(self) -> list[tuple[int, list[int]]]:
        """(origin, [column indices]) pairs, origins ascending, columns extra-ascending."""
        groups: dict[int, list[int]] = {}
        for idx, origin in enumerate(self.origins):
            groups.setdefault(origin, []).append(idx)
        return sorted(groups.items())

    def dense(self):
        import numpy as np

        out = np.zeros((self.d, len(self.columns)), dtype=np.int8)
        for idx, rows in enumerate(self.columns):
            out[list(rows), idx] = 1
        return out

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "r": self.r,
            "columns": [list(rows) for rows in self.columns],
            "origins": list(self.origins),
        }


def build_constraint_matrix(pattern: SamplingPattern, r: int) -> ConstraintMatrix:
    """Derive the constraint columns of a pattern at rank r.

    A data column with fewer than r+1 observations contributes no columns.
    """
    if r < 1:
        raise ValueError("rank must be positive")
    columns: list[tuple[int, ...]] = []
    origins: list[int] = []
    extras: list[int] = []
    for j in range(pattern.N):
        rows = pattern.column_rows(j)
        if len(rows) <= r:
            continue
        base = rows[:r]
        for extra in rows[r:]:
            columns.append(tuple(sorted(base + (extra,))))
            origins.append(j)
            extras.append(extra)
    return ConstraintMatrix(pattern.d, r, tuple(columns), tuple(origins), tuple(extras))


def remove_entries(pattern: SamplingPattern, removal: RemovalSet) -> SamplingPattern:
    """Delete the removal cells from the pattern; every cell must be observed."""
    missing = removal.cells - pattern.observed
    if missing:
        raise ValueError(f"removal contains unobserved cells: {sorted(missing)[:4]}")
    return SamplingPattern(pattern.d, pattern.N, pattern.observed - removal.cells)


def count_removals(pattern: SamplingPattern, budget: NoiseBudget, extra: int) -> int:
    """Number of removal sets enumerate_removals would yield (without enumerating)."""
    if extra < 0:
        raise ValueError("extra must be non-negative")
    if budget.kind == GLOBAL:
        need = budget.amount + extra
        total = len(pattern.observed)
        if need > total:
            raise ValueError(f"cannot remove {need} cells from {total} observed")
        return math.comb(total, need)
    need = budget.amount + extra
    count = 1
    for j, l in enumerate(pattern.column_counts()):
        if l < need:
            raise ValueError(f"column {j} has {l} observed cells; cannot remove {need}")
        count *= math.comb(l, need)
    return count


def enumerate_removals(
    pattern: SamplingPattern,
    budget: NoiseBudget,
    extra: int = 0,
    part: int = 0,
    parts: int = 1,
) -> Iterator[RemovalSet]:
    """Stream every removal set for the budget, in deterministic lexicographic order.

    Global budgets yield all cell subsets of size amount+extra; per-column
    budgets yield the Cartesian product of per-column choices of exactly
    amount+extra cells.  `part`/`parts` select a residue class of the stream
    so concurrent consumers can partition work reproducibly.
    """
    count_removals(pattern, budget, extra)  # validate preconditions up front
    if parts < 1 or not (0 <= part < parts):
        raise ValueError("need 0 <= part < parts")
    need = budget.amount + extra

    if budget.kind == GLOBAL:
        stream: Iterable[tuple[Cell, ...]] = combinations(pattern.cells(), need)
    else:
        per_column = []
        for j in range(pattern.N):
            col_cells = tuple((i, j) for i in pattern.column_rows(j))
            per_column.append(tuple(combinations(col_cells, need)))
        stream = (
            tuple(cell for chunk in choice for cell in chunk)
            for choice in product(*per_column)
        )

    for index, cells in enumerate(stream):
        if index % parts == part:
            yield RemovalSet(frozenset(cells))


def serialize_pattern(pattern: SamplingPattern) -> str:
    """Canonical text form: `d N` header then one `row col` line per cell, ascending."""
    lines = [f"{pattern.d} {pattern.N}"]
    lines.extend(f"{i} {j}" for i, j in pattern.cells())
    return "\n".join(lines) + "\n"


def parse_pattern(text: str) -> SamplingPattern:
    """Parse the pattern text format; `#` starts a comment line."""
    header: tuple[int, int] | None = None
    cells: list[Cell] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if header is None:
            if len(fields) != 2:
                raise PatternFormatError(f"line {lineno}: expected `d N` header")
            try:
                header = (int(fields[0]), int(fields[1]))
            except ValueError as exc:
                raise PatternFormatError(f"line {lineno}: bad header {line!r}") from exc
            continue
        if len(fields) != 2:
            raise PatternFormatError(f"line {lineno}: expected `row col`")
        try:
            cell = (int(fields[0]), int(fields[1]))
        except ValueError as exc:
            raise PatternFormatError(f"line {lineno}: bad cell {line!r}") from exc
        cells.append(cell)
    if header is None:
        raise PatternFormatError("missing `d N` header line")
    d, N = header
    if d <= 0 or N <= 0:
        raise PatternFormatError("dimensions must be positive")
    if len(set(cells)) != len(cells):
        raise PatternFormatError("duplicate observed cells")
    for i, j in cells:
        if not (0 <= i < d and 0 <= j < N):
            raise PatternFormatError(f"cell ({i}, {j}) outside a {d}x{N} grid")
    return SamplingPattern(d, N, frozenset(cells))


def load_pattern(path) -> SamplingPattern:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pattern(fh.read())


def save_pattern(pattern: SamplingPattern, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_pattern(pattern))
