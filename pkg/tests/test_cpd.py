import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ordinal_cpd import ConfigurationError, DegenerateInputError, InvalidInputError
from ordinal_cpd.cpd import (
    ChangePointReport,
    NullQuantileTable,
    cusum_statistic,
    default_block_size,
    null_quantiles,
    run_test,
    self_normalizer,
    simulate_null,
    sn_cusum_statistic,
    test_turning_rates,
)
from ordinal_cpd.estimate import turning_rate_series
from ordinal_cpd.linproc import LinearProcessSpec, integrate, simulate_increments

from oracles import (
    naive_cusum,
    naive_cusum_max,
    naive_normalizer,
    naive_sn_squared,
    naive_sn_squared_at,
)


GRID = [Fraction(0), Fraction(1, 2), Fraction(1)]


def test_frozen_values():
    q = [0, 0, 1, 1, 0, 1]
    assert self_normalizer(q, 3) == pytest.approx(7 / 54, rel=1e-14)
    assert naive_normalizer([Fraction(v) for v in q], 3) == Fraction(7, 54)
    value, k = sn_cusum_statistic(q)
    assert value == pytest.approx(4.0, rel=1e-13) and k == 2
    assert naive_sn_squared([Fraction(v) for v in q]) == (16, 2)


def test_cusum_examples():
    assert cusum_statistic([0, 0, 1, 1]) == (1.0, 2)
    assert cusum_statistic([0.3] * 7) == (0.0, 1)
    v, k = cusum_statistic([0.1, 0.9, 0.4, 0.2])
    v2, k2 = cusum_statistic(np.array([0.1, 0.9, 0.4, 0.2]) + 5)
    assert k == k2 and v2 == pytest.approx(v, rel=1e-12)
    with pytest.raises(InvalidInputError):
        cusum_statistic([1.0])


def test_normalizer_examples():
    assert self_normalizer([0.25] * 6, 3) == 0
    assert self_normalizer([0, 1], 1) == 0
    for k in (0, 6):
        with pytest.raises(InvalidInputError):
            self_normalizer([0, 0, 1, 1, 0, 1], k)


@pytest.mark.parametrize("n", range(2, 7))
def test_cusum_matches_oracle_exhaustively(n):
    for combo in itertools.product(GRID, repeat=n):
        value, k = cusum_statistic([float(v) for v in combo])
        best, arg = naive_cusum_max(list(combo))
        assert value == pytest.approx(float(best), rel=1e-12, abs=1e-14)
        if best > 0:
            # near-ties may swap under rounding; the chosen k must attain the max
            assert float(naive_cusum(list(combo), k)) == pytest.approx(float(best), rel=1e-12)
            if k != arg:
                assert k > arg


@pytest.mark.parametrize("n", range(4, 7))
def test_sn_matches_oracle_exhaustively(n):
    for combo in itertools.product(GRID, repeat=n):
        q = [float(v) for v in combo]
        best, arg = naive_sn_squared(list(combo))
        if best is None:
            with pytest.raises(DegenerateInputError):
                sn_cusum_statistic(q)
            continue
        value, k = sn_cusum_statistic(q)
        assert value == pytest.approx(math.sqrt(best), rel=1e-12)
        assert k == arg or math.sqrt(naive_sn_squared_at(list(combo), k)) == pytest.approx(value, rel=1e-12)
        for j in range(1, n):
            assert self_normalizer(q, j) == pytest.approx(float(naive_normalizer(list(combo), j)),
                                                          rel=1e-12, abs=1e-15)


@given(st.lists(st.floats(0, 1), min_size=4, max_size=40),
       st.floats(0.01, 100), st.floats(-10, 10))
def test_sn_affine_invariance(values, a, b):
    q = np.asarray(values)
    if np.ptp(q) < 1e-3:
        return
    try:
        v, k = sn_cusum_statistic(q)
    except DegenerateInputError:
        return
    for sign in (1, -1):
        v2, k2 = sn_cusum_statistic(sign * a * q + b)
        assert v2 == pytest.approx(v, rel=1e-9)
        assert k2 == k or abs(v2 - v) < 1e-9 * v


def test_sn_invariance_on_a_realistic_series():
    q = np.random.default_rng(0).random(60)
    v, k = sn_cusum_statistic(q)
    for a, b in [(1.0, 0.25), (3.0, 0.0), (0.5, -2.0), (-1.0, 1.0)]:
        v2, k2 = sn_cusum_statistic(a * q + b)
        assert k2 == k and v2 == pytest.approx(v, rel=1e-12)


def test_sn_degenerate_and_short():
    with pytest.raises(DegenerateInputError, match="no variability"):
        sn_cusum_statistic([0.5] * 10)
    with pytest.raises(InvalidInputError):
        sn_cusum_statistic([0, 1, 0])


def test_sn_skips_zero_normalizers():
    # only k=2 isolates two constant segments; every other split has variability
    q = [0, 0, 1, 1]
    value, k = sn_cusum_statistic(q)
    exact, arg = naive_sn_squared([Fraction(v) for v in q])
    assert k == arg and value == pytest.approx(math.sqrt(exact))


def test_null_reproducible_and_thread_independent():
    a = simulate_null("sn_cusum", 200, 2500, seed=4, threads=1)
    b = simulate_null("sn_cusum", 200, 2500, seed=4, threads=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_null("sn_cusum", 200, 2500, seed=5))


def test_quantile_table(small_table):
    t = null_quantiles("cusum", (0.01, 0.05, 0.1), grid_size=200, reps=2000, seed=3)
    q = [t.critical_value(a) for a in (0.01, 0.05, 0.1)]
    assert q[0] > q[1] > q[2] > 0
    assert t.level_quantile(1.0) >= t.sample.max()
    assert t.level_quantile(1.0) == t.sample.max()
    assert null_quantiles("cusum", (0.05,), 200, 2000, 3).quantiles[0.05] == t.quantiles[0.05]
    assert small_table.critical_value(0.05) == small_table.quantiles[0.05]
    # a level outside the table is interpolated from the stored sample
    assert small_table.critical_value(0.2) < small_table.critical_value(0.05)


@pytest.mark.parametrize("kwargs", [dict(grid_size=99), dict(reps=999), dict(kind="other"),
                                    dict(alphas=(0.0,)), dict(alphas=(1.0,))])
def test_quantile_validation(kwargs):
    args = dict(kind="sn_cusum", alphas=(0.05,), grid_size=100, reps=1000, seed=1)
    args.update(kwargs)
    with pytest.raises(ConfigurationError):
        null_quantiles(**args)


def test_p_value(small_table):
    s = small_table.sample
    assert small_table.p_value(np.inf) == 1 / (1 + s.size)
    assert small_table.p_value(-np.inf) == 1.0
    median = float(np.median(s))
    expected = (1 + np.count_nonzero(s >= median)) / (1 + s.size)
    assert small_table.p_value(median) == expected


def test_table_json_round_trip(small_table):
    data = json.loads(small_table.to_json())
    back = NullQuantileTable.from_dict(data)
    assert back == small_table
    assert np.array_equal(back.sample, small_table.sample)
    data["replications"] = 5
    with pytest.raises(ConfigurationError):
        NullQuantileTable.from_dict(data)
    with pytest.raises(ConfigurationError):
        NullQuantileTable.from_dict({"statistic_kind": "sn_cusum"})


def test_default_block_size():
    assert default_block_size(5000) == math.ceil(5000 ** 0.6)
    assert default_block_size(1) == 1


def test_run_test_report(small_table):
    x = integrate(simulate_increments(LinearProcessSpec.ma(0.4), 5000, seed=2)).samples
    r = run_test(x, alpha=0.05, quantiles=small_table)
    m = default_block_size(x.size)
    assert r.block_m == m and r.n_b == x.size // (m + 2)
    assert r.reject == (r.statistic > r.critical_value)
    assert 1 <= r.argmax_block <= r.n_b - 1
    assert r.estimated_sample_index == r.argmax_block * (m + 2)
    assert 0 < r.p_value <= 1
    assert json.loads(r.to_json())["statistic_kind"] == "sn_cusum"
    assert isinstance(r, ChangePointReport)


def test_run_test_detects_a_large_change(small_table):
    x = integrate(np.concatenate((np.random.default_rng(1).normal(size=3000),
                                  np.tile([1.0, -1.0], 1500)))).samples
    r = run_test(x, block_m=50, quantiles=small_table)
    assert r.reject and r.p_value < 0.01
    assert abs(r.estimated_sample_index - 3000) <= 2 * 52


def test_run_test_errors(small_table):
    with pytest.raises(DegenerateInputError):
        run_test(np.zeros(1000), block_m=10, quantiles=small_table)
    with pytest.raises(InvalidInputError):
        run_test(np.arange(30.0), block_m=10, quantiles=small_table)
    cusum_table = null_quantiles("cusum", (0.05,), 100, 1000, 1)
    with pytest.raises(ConfigurationError):
        test_turning_rates(turning_rate_series(np.random.default_rng(0).random(100), 5), 0.05,
                           cusum_table)
