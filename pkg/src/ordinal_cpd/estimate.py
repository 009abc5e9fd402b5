"""Pattern frequencies, turning rates and related summary statistics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_series, check_int
from .exceptions import InvalidInputError
from .ordpat import (
    DEFAULT_MAX_ORDER,
    Pattern,
    code_of,
    count_patterns,
    enumerate_patterns,
    pattern_codes,
)

#: The four order-2 patterns with a strict interior extremum.
TURNING_PATTERNS = frozenset(Pattern(p) for p in [(0, 2, 1), (2, 0, 1), (1, 2, 0), (1, 0, 2)])
MONOTONE_PATTERNS = frozenset(Pattern(p) for p in [(0, 1, 2), (2, 1, 0)])

_TURNING_CODES = np.array(sorted(code_of(p) for p in TURNING_PATTERNS))


@dataclass(frozen=True)
class TurningRateSeries:
    """Turning rates of consecutive, disjoint blocks of ``block_m + 2`` samples."""

    values: np.ndarray
    block_m: int
    n_b: int
    source_length: int

    @property
    def block_length(self) -> int:
        return self.block_m + 2

    def block_start(self, k: int) -> int:
        """Sample index at which block ``k`` (0-based) begins."""
        return k * self.block_length

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["block_index", "q_hat"])
        for j, q in enumerate(self.values.tolist(), start=1):
            writer.writerow([j, repr(q)])
        return buf.getvalue()


def pattern_frequencies(series, order: int, *,
                        max_order: int = DEFAULT_MAX_ORDER) -> dict[Pattern, float]:
    """Relative frequency of every pattern of ``order``; unobserved ones map to 0."""
    counts = count_patterns(series, order, max_order=max_order)
    total = counts.total_windows
    return {p: counts.counts.get(p, 0) / total
            for p in enumerate_patterns(order, max_order=max_order)}


def turning_indicator(series) -> np.ndarray:
    """1.0 where the order-2 window starting at ``t`` is a turning pattern."""
    codes = pattern_codes(series, 2)
    return np.isin(codes, _TURNING_CODES).astype(np.float64)


def turning_rate(epoch) -> float:
    """Fraction of the ``len(epoch) - 2`` windows of length three that turn."""
    x = as_series(epoch, min_length=3, name="epoch")
    return float(turning_indicator(x).mean())


def turning_rate_series(series, block_m: int) -> TurningRateSeries:
    """Per-block turning rates; samples past the last full block are dropped."""
    m = check_int(block_m, "block_m", minimum=1)
    x = as_series(series, min_length=m + 2)
    block = m + 2
    n_b = x.size // block
    used = x[: n_b * block]
    ind = turning_indicator(used)
    # Windows crossing a block boundary are padded out and then sliced away.
    ind = np.concatenate((ind, np.zeros(2))).reshape(n_b, block)[:, :m]
    values = ind.sum(axis=1) / m
    values.setflags(write=False)
    return TurningRateSeries(values, m, n_b, int(x.size))


def permutation_entropy(q: float) -> float:
    """Order-2 permutation entropy of a pattern law with turning rate ``q``.

    Assumes the symmetric law (equal monotone and equal turning pattern
    probabilities); ``0 * log(c / 0)`` is taken as 0.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0 or math.isnan(q):
        raise InvalidInputError(f"turning rate must lie in [0, 1], got {q}")
    out = 0.0
    if q > 0.0:
        out += q * math.log(4.0 / q)
    if q < 1.0:
        out += (1.0 - q) * math.log(2.0 / (1.0 - q))
    return out


def plug_in_long_run_variance(values, max_lag: int | None = None) -> float:
    """Sample variance plus twice the sample autocovariances up to ``max_lag``.

    Autocovariances use the ``1/n`` normalization.  The default lag is
    ``ceil(n ** (1/3))``.
    """
    y = as_series(values, min_length=2, name="values")
    n = y.size
    if max_lag is None:
        max_lag = math.ceil(n ** (1.0 / 3.0))
    max_lag = check_int(max_lag, "max_lag", minimum=0)
    if max_lag >= n:
        raise InvalidInputError(f"max_lag={max_lag} needs more than {max_lag} values, got {n}")
    c = y - y.mean()
    total = c @ c / n
    for h in range(1, max_lag + 1):
        total += 2.0 * (c[:-h] @ c[h:]) / n
    return float(total)


def lag1_autocorrelation(x) -> float:
    x = as_series(x, min_length=2)
    c = x - x.mean()
    denom = c @ c
    if denom == 0.0:
        return float("nan")
    return float(c[:-1] @ c[1:] / denom)


def spectral_centroid_check(series) -> tuple[float, float, float]:
    """``(q_bar, cos(pi * q_bar), rho1)`` for a path ``series``.

    ``q_bar`` is the turning rate over the whole path and ``rho1`` the lag-one
    autocorrelation of its increments.  For stationary Gaussian increments
    the last two agree.
    """
    x = as_series(series, min_length=3)
    q_bar = float(turning_indicator(x).mean())
    return q_bar, math.cos(math.pi * q_bar), lag1_autocorrelation(np.diff(x))
