"""scikit-learn compatible front ends for pattern features and the change test.

The transformers treat each row of ``X`` as one epoch, which is how EEG
recordings are usually cut before classification, so they slot into a
``Pipeline`` next to any classifier.  The detector is fitted on one long
series and ``predict`` labels its samples by regime.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_series, check_alpha
from .cpd import (
    DEFAULT_GRID,
    DEFAULT_REPS,
    DEFAULT_SEED,
    NullQuantileTable,
    default_block_size,
    default_table,
    null_quantiles,
    test_turning_rates,
)
from .estimate import permutation_entropy, turning_indicator, turning_rate_series
from .ordpat import DEFAULT_MAX_ORDER, code_of, enumerate_patterns, pattern_codes


def _epochs(X, min_length: int) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] < min_length:
        raise ValueError(f"epochs need at least {min_length} samples, got {X.shape[1]}")
    return X


class OrdinalPatternTransformer(TransformerMixin, BaseEstimator):
    """Relative frequency of every ordinal pattern within each row of ``X``.

    Parameters
    ----------
    order : int, default=2
        Patterns describe ``order + 1`` consecutive values.

    Attributes
    ----------
    patterns_ : list of Pattern
        Column labels of the transformed output, in lexicographic order.
    """

    def __init__(self, order: int = 2):
        self.order = order

    def fit(self, X, y=None):
        X = _epochs(X, self.order + 1)
        self.patterns_ = enumerate_patterns(self.order, max_order=DEFAULT_MAX_ORDER)
        self._codes = np.array([code_of(p) for p in self.patterns_])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "patterns_")
        X = _epochs(X, self.order + 1)
        out = np.empty((X.shape[0], len(self.patterns_)))
        for i, row in enumerate(X):
            codes = pattern_codes(row, self.order)
            out[i] = np.mean(codes[:, None] == self._codes[None, :], axis=0)
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "patterns_")
        return np.array([f"pattern{p}" for p in self.patterns_], dtype=object)


class TurningRateTransformer(TransformerMixin, BaseEstimator):
    """Turning rate of each row, optionally with its permutation entropy."""

    def __init__(self, entropy: bool = False):
        self.entropy = entropy

    def fit(self, X, y=None):
        X = _epochs(X, 3)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = _epochs(X, 3)
        q = np.array([turning_indicator(row).mean() for row in X])
        if self.entropy:
            return np.column_stack((q, [permutation_entropy(v) for v in q]))
        return q[:, None]

    def get_feature_names_out(self, input_features=None):
        return np.array(["turning_rate", "permutation_entropy"][: 1 + bool(self.entropy)],
                        dtype=object)


class TurningRateChangeDetector(BaseEstimator):
    """Self-normalized CUSUM test for one change in the turning rate of a series.

    Parameters
    ----------
    block_m : int or None
        Windows per block; blocks hold ``block_m + 2`` samples.  ``None``
        uses ``ceil(n ** 0.6)``.
    alpha : float
        Significance level.
    quantiles : NullQuantileTable or None
        Precomputed critical values.  When omitted a table is simulated from
        ``grid_size``, ``mc_reps`` and ``random_state`` (and memoized).

    Attributes
    ----------
    report_ : ChangePointReport
    turning_rates_ : TurningRateSeries
    change_point_ : int or None
        Estimated first sample of the new regime, ``None`` without rejection.
    """

    def __init__(self, block_m=None, alpha=0.05, quantiles=None, grid_size=DEFAULT_GRID,
                 mc_reps=DEFAULT_REPS, random_state=DEFAULT_SEED):
        self.block_m = block_m
        self.alpha = alpha
        self.quantiles = quantiles
        self.grid_size = grid_size
        self.mc_reps = mc_reps
        self.random_state = random_state

    def _table(self) -> NullQuantileTable:
        if self.quantiles is not None:
            return self.quantiles
        if (self.grid_size, self.mc_reps, self.random_state) == (DEFAULT_GRID, DEFAULT_REPS,
                                                                 DEFAULT_SEED):
            return default_table()
        return null_quantiles("sn_cusum", (self.alpha,), self.grid_size, self.mc_reps,
                              self.random_state)

    def fit(self, X, y=None):
        x = as_series(X, min_length=3, name="X")
        check_alpha(self.alpha)
        m = self.block_m if self.block_m is not None else default_block_size(x.size)
        self.turning_rates_ = turning_rate_series(x, m)
        self.report_ = test_turning_rates(self.turning_rates_, self.alpha, self._table())
        self.n_samples_ = x.size
        self.statistic_ = self.report_.statistic
        self.p_value_ = self.report_.p_value
        self.reject_ = self.report_.reject
        self.change_point_ = self.report_.estimated_sample_index if self.reject_ else None
        return self

    def predict(self, X=None):
        """Regime label (0 before the change, 1 from it on) for every sample."""
        check_is_fitted(self, "report_")
        n = self.n_samples_ if X is None else as_series(X, name="X").size
        labels = np.zeros(n, dtype=np.int64)
        if self.change_point_ is not None:
            labels[self.change_point_:] = 1
        return labels

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()
