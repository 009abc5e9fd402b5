"""Ordinal patterns of consecutive values and their increment-matrix form.

A pattern of order ``r`` is the rank tuple ``(pi_0, ..., pi_r)`` of a window
``(xi_0, ..., xi_r)``: ``pi_j`` is the ascending rank of ``xi_j`` (0 for the
smallest value).  Among equal values the later index receives the higher
rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from math import factorial
from typing import Iterator, Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._validation import as_series, check_int
from .exceptions import InvalidInputError

#: Largest ``r`` accepted by default, i.e. windows of at most 8 values.
DEFAULT_MAX_ORDER = 7


@dataclass(frozen=True, order=True)
class Pattern:
    """A permutation of ``{0, ..., r}`` holding ascending ranks."""

    ranks: tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(v) for v in self.ranks)
        if len(ranks) < 2:
            raise InvalidInputError("a pattern needs at least two ranks")
        if sorted(ranks) != list(range(len(ranks))):
            raise InvalidInputError(f"{ranks} is not a permutation of 0..{len(ranks) - 1}")
        object.__setattr__(self, "ranks", ranks)

    @property
    def order(self) -> int:
        """The order ``r``; the pattern describes ``r + 1`` values."""
        return len(self.ranks) - 1

    def descending_indices(self) -> tuple[int, ...]:
        """Window indices sorted from the largest value to the smallest."""
        r = self.order
        inverse = [0] * (r + 1)
        for index, rank in enumerate(self.ranks):
            inverse[r - rank] = index
        return tuple(inverse)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ranks)

    def __len__(self) -> int:
        return len(self.ranks)

    def __str__(self) -> str:
        return "(" + ",".join(str(v) for v in self.ranks) + ")"


def as_pattern(value) -> Pattern:
    if isinstance(value, Pattern):
        return value
    if isinstance(value, str):
        value = [int(tok) for tok in value.strip("()[] ").split(",") if tok.strip()]
    return Pattern(tuple(value))


@dataclass(frozen=True)
class PatternMatrix:
    """The ``r x r`` matrix ``V`` with ``{pattern} = {V @ increments <= 0}``."""

    pattern: Pattern
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.int64)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def determinant(self) -> int:
        return int(round(np.linalg.det(self.entries)))


@dataclass(frozen=True)
class PatternCounts:
    order: int
    counts: Mapping[Pattern, int]
    total_windows: int

    def frequencies(self) -> dict[Pattern, float]:
        if self.total_windows == 0:
            return {}
        return {p: c / self.total_windows for p, c in self.counts.items()}


def _check_order(order, max_order: int) -> int:
    return check_int(order, "order", minimum=1, maximum=max_order)


def pattern_of(window) -> Pattern:
    """Ordinal pattern of a single window.

    >>> pattern_of([10.19, 48.97, 29.58])
    Pattern(ranks=(0, 2, 1))
    """
    w = as_series(window, min_length=2, name="window")
    # A stable sort places tied values in index order, so later ties rank higher.
    order = np.argsort(w, kind="stable")
    ranks = np.empty(w.size, dtype=np.int64)
    ranks[order] = np.arange(w.size)
    return Pattern(tuple(ranks.tolist()))


def enumerate_patterns(order: int, *, max_order: int = DEFAULT_MAX_ORDER) -> list[Pattern]:
    """All ``(order + 1)!`` patterns of the given order in lexicographic order."""
    r = _check_order(order, max_order)
    return [Pattern(p) for p in permutations(range(r + 1))]


def pattern_matrix(pattern) -> PatternMatrix:
    """Increment matrix of a pattern, built as ``D @ P @ L``.

    ``L`` maps increments ``(X_1..X_r)`` to ``(xi_k - xi_0)_k``, ``P`` reorders
    those offsets from the largest value to the smallest, and ``D`` takes
    successive differences, which are all non-positive exactly when the window
    has the pattern.
    """
    pattern = as_pattern(pattern)
    r = pattern.order
    diff = np.zeros((r, r + 1), dtype=np.int64)
    diff[np.arange(r), np.arange(r)] = -1
    diff[np.arange(r), np.arange(1, r + 1)] = 1
    perm = np.zeros((r + 1, r + 1), dtype=np.int64)
    perm[np.arange(r + 1), pattern.descending_indices()] = 1
    lower = np.tril(np.ones((r + 1, r), dtype=np.int64), k=-1)
    return PatternMatrix(pattern, diff @ perm @ lower)


def pattern_at_via_matrix(pattern, increments) -> bool:
    """True iff every component of ``V_pattern @ increments`` is ``<= 0``."""
    matrix = pattern_matrix(pattern)
    x = as_series(increments, name="increments")
    if x.size != matrix.pattern.order:
        raise InvalidInputError(
            f"pattern of order {matrix.pattern.order} needs {matrix.pattern.order} "
            f"increments, got {x.size}"
        )
    return bool(np.all(matrix.entries @ x <= 0))


def matrix_membership(pattern, increments) -> np.ndarray:
    """Row-wise :func:`pattern_at_via_matrix` for an ``(N, order)`` array."""
    matrix = pattern_matrix(pattern)
    X = np.asarray(increments, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != matrix.pattern.order:
        raise InvalidInputError(
            f"expected shape (N, {matrix.pattern.order}), got {X.shape}"
        )
    return np.all(X @ matrix.entries.T <= 0, axis=1)


def window_ranks(series, order: int, *, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """Rank tuples of all stride-1 windows, shape ``(n - order, order + 1)``."""
    r = _check_order(order, max_order)
    x = as_series(series, min_length=r + 1)
    windows = sliding_window_view(x, r + 1)
    ranks = np.zeros(windows.shape, dtype=np.int64)
    for j in range(r + 1):
        col = windows[:, j : j + 1]
        ranks[:, j] = np.sum(windows < col, axis=1)
        if j:
            ranks[:, j] += np.sum(windows[:, :j] == col, axis=1)
    return ranks


def pattern_codes(series, order: int, *, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """Integer code per window; codes sort in the same order as the patterns."""
    ranks = window_ranks(series, order, max_order=max_order)
    base = order + 1
    weights = base ** np.arange(order, -1, -1, dtype=np.int64)
    return ranks @ weights


def code_of(pattern) -> int:
    pattern = as_pattern(pattern)
    code = 0
    for rank in pattern.ranks:
        code = code * (pattern.order + 1) + rank
    return code


def count_patterns(series, order: int, *, max_order: int = DEFAULT_MAX_ORDER) -> PatternCounts:
    """Counts of each pattern over all overlapping windows of ``order + 1`` values.

    Only observed patterns appear as keys.
    """
    codes = pattern_codes(series, order, max_order=max_order)
    observed, counts = np.unique(codes, return_counts=True)
    base = order + 1
    result = {}
    for code, count in zip(observed.tolist(), counts.tolist()):
        digits = []
        for _ in range(base):
            code, digit = divmod(code, base)
            digits.append(digit)
        result[Pattern(tuple(reversed(digits)))] = count
    return PatternCounts(order=order, counts=result, total_windows=int(codes.size))


def factorial_size(order: int) -> int:
    return factorial(order + 1)
