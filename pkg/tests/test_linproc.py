import json
import math

import numpy as np
import pytest
from scipy.special import gamma

from ordinal_cpd import ConfigurationError
from ordinal_cpd.estimate import lag1_autocorrelation
from ordinal_cpd.linproc import (
    BreakSpec,
    LinearProcessSpec,
    NoiseSpec,
    TimeSeries,
    derive_seed,
    farima_coefficients,
    integrate,
    lrd_variance_constant,
    process_from_dict,
    sample_noise,
    simulate,
    simulate_increments,
    simulate_with_break,
)


def test_gaussian_moments():
    n = 10**6
    z = sample_noise(NoiseSpec.gaussian(), n, seed=3)
    assert abs(z.mean()) < 4 / math.sqrt(n)
    assert abs(z.var() - 1) < 0.01


def test_laplace_variance():
    z = sample_noise(NoiseSpec.laplace(0, 4), 10**6, seed=4)
    assert abs(z.var() / 32 - 1) < 0.02


def test_student_t_is_heavy_tailed_but_centered():
    z = sample_noise(NoiseSpec.student_t(2), 10**5, seed=5)
    assert abs(np.median(z)) < 0.02
    assert np.max(np.abs(z)) > 50


@pytest.mark.parametrize("spec", [NoiseSpec.gaussian(), NoiseSpec.student_t(3),
                                  NoiseSpec.laplace(1, 2)])
def test_noise_empty_and_deterministic(spec):
    assert sample_noise(spec, 0, 1).size == 0
    assert np.array_equal(sample_noise(spec, 50, 9), sample_noise(spec, 50, 9))
    assert not np.array_equal(sample_noise(spec, 50, 9), sample_noise(spec, 50, 10))


@pytest.mark.parametrize("kwargs", [
    dict(family="gaussian", scale=0.0),
    dict(family="student_t", df=0.0),
    dict(family="student_t"),
    dict(family="laplace", scale=-1.0),
    dict(family="cauchy"),
])
def test_noise_validation(kwargs):
    with pytest.raises(ConfigurationError):
        NoiseSpec(**kwargs)


def test_farima_coefficients():
    assert np.allclose(farima_coefficients(0.3, 2), [1.0, 0.3, 0.195], rtol=0, atol=1e-15)
    b = farima_coefficients(0.3, 10**4)
    for j in (10**3, 10**4):
        assert abs(b[j] * gamma(0.3) * j**0.7 - 1) < 0.05
    tiny = farima_coefficients(1e-12, 5)
    assert tiny[0] == 1 and np.all(np.abs(tiny[1:]) < 1e-11)
    for d in (0.0, 0.5, -0.1):
        with pytest.raises(ConfigurationError):
            farima_coefficients(d, 3)


def test_lrd_constant():
    d = 0.3
    expected = gamma(d) ** 2 / (gamma(2 * d + 2) * math.cos(math.pi * d))
    assert lrd_variance_constant(d) == pytest.approx(expected, rel=1e-14)


def test_ma1_autocorrelation():
    x = simulate_increments(LinearProcessSpec.ma(0.4), 200_000, seed=6).samples
    assert abs(lag1_autocorrelation(x) - 0.4 / 1.16) < 4 / math.sqrt(x.size)


def test_ar0_is_the_noise():
    spec = LinearProcessSpec.ar(0.0, burn_in=7)
    x = simulate_increments(spec, 100, seed=8).samples
    z = sample_noise(spec.noise, 107, seed=8)
    assert np.array_equal(x, z[7:])


def test_ma_is_the_explicit_sum():
    spec = LinearProcessSpec.ma(0.5, -0.25, burn_in=3)
    x = simulate_increments(spec, 20, seed=2).samples
    z = sample_noise(spec.noise, 2 + 3 + 20, seed=2)
    expected = [z[t] + 0.5 * z[t - 1] - 0.25 * z[t - 2] for t in range(5, 25)]
    assert np.allclose(x, expected, rtol=0, atol=1e-14)


def test_farima_autocorrelation_decay():
    x = simulate_increments(LinearProcessSpec.farima(0.3, truncation=5000), 400_000, seed=7).samples
    x = x - x.mean()
    lags = np.unique(np.geomspace(10, 200, 15).astype(int))
    acf = np.array([np.dot(x[:-k], x[k:]) for k in lags]) / np.dot(x, x)
    slope = np.polyfit(np.log(lags), np.log(acf), 1)[0]
    assert abs(slope - (2 * 0.3 - 1)) < 0.1


def test_symmetric_noise_mean():
    x = simulate_increments(LinearProcessSpec.ar(0.5), 100_000, seed=9).samples
    se = 2.0 / math.sqrt(x.size)  # long-run sd of AR(0.5) is 1/(1-0.5)
    assert abs(x.mean()) < 4 * se


def test_ar_stationarity_and_model_validation():
    with pytest.raises(ConfigurationError):
        LinearProcessSpec.ar(1.0)
    with pytest.raises(ConfigurationError):
        LinearProcessSpec.ar(0.5, 0.6)
    LinearProcessSpec.ar(0.5, 0.3)
    with pytest.raises(ConfigurationError):
        LinearProcessSpec.farima(0.6)
    with pytest.raises(ConfigurationError):
        LinearProcessSpec.farima(0.3, truncation=0)
    with pytest.raises(ConfigurationError):
        LinearProcessSpec(kind="arma")
    with pytest.raises(ConfigurationError):
        LinearProcessSpec.ma(0.1, burn_in=-1)


def test_break_lag1_autocorrelations():
    spec = BreakSpec(LinearProcessSpec.ar(0.4), LinearProcessSpec.ar(0.8), 0.5)
    assert spec.break_index(1000) == 500
    first, second = [], []
    for r in range(200):
        x = simulate_with_break(spec, 1000, seed=derive_seed(1, r)).samples
        first.append(lag1_autocorrelation(x[:500]))
        second.append(lag1_autocorrelation(x[500:]))
    # small-sample bias of the lag-1 estimator is about -(1 + 4 phi) / n
    assert abs(np.mean(first) - 0.4) < 0.02
    assert abs(np.mean(second) - 0.8) < 0.02


def test_break_continues_ar_state():
    spec = BreakSpec(LinearProcessSpec.ar(0.4, burn_in=10), LinearProcessSpec.ar(0.8, burn_in=10), 0.5)
    x = simulate_with_break(spec, 40, seed=3).samples
    z = sample_noise(spec.pre.noise, 50, seed=3)
    y, prev = [], 0.0
    for t in range(50):
        prev = (0.4 if t < 10 + 20 else 0.8) * prev + z[t]
        y.append(prev)
    assert np.allclose(x, y[10:], rtol=0, atol=1e-13)


@pytest.mark.parametrize("make", [lambda: LinearProcessSpec.ar(0.4),
                                  lambda: LinearProcessSpec.ma(0.4),
                                  lambda: LinearProcessSpec.farima(0.2, truncation=300)])
def test_break_without_change_is_the_plain_process(make):
    spec = make()
    a = simulate_with_break(BreakSpec(spec, make(), 0.3), 500, seed=12).samples
    b = simulate_increments(spec, 500, seed=12).samples
    assert np.array_equal(a, b)


def test_break_validation():
    with pytest.raises(ConfigurationError):
        BreakSpec(LinearProcessSpec.ar(0.4), LinearProcessSpec.ar(0.8), 1.0)
    with pytest.raises(ConfigurationError):
        BreakSpec(LinearProcessSpec.ar(0.4),
                  LinearProcessSpec.ar(0.8, noise=NoiseSpec.laplace()), 0.5)


def test_determinism():
    for spec in (LinearProcessSpec.ma(0.4), LinearProcessSpec.ar(0.3),
                 LinearProcessSpec.farima(0.3, truncation=200)):
        assert np.array_equal(simulate(spec, 300, 5).samples, simulate(spec, 300, 5).samples)


def test_integrate():
    assert integrate([1, -1, 2]).samples.tolist() == [0, 1, 0, 2]
    assert integrate([], 3.5).samples.tolist() == [3.5]
    x = np.random.default_rng(0).normal(size=1000)
    xi = integrate(x, 2.0).samples
    assert xi.size == 1001 and xi[0] == 2.0
    # differences of a running float sum are exact only up to rounding
    assert np.allclose(np.diff(xi), x, rtol=0, atol=1e-12)
    ints = np.arange(-50, 50, dtype=float)
    assert np.array_equal(np.diff(integrate(ints).samples), ints)


def test_time_series_is_read_only_and_finite():
    ts = TimeSeries([1.0, 2.0])
    assert len(ts) == 2
    with pytest.raises(ValueError):
        ts.samples[0] = 3
    with pytest.raises(ValueError):
        TimeSeries([1.0, np.nan])


def test_json_round_trip():
    specs = [
        LinearProcessSpec.ma(0.4, noise=NoiseSpec.laplace(0, 4)),
        LinearProcessSpec.farima(0.3, truncation=500, noise=NoiseSpec.student_t(2)),
        BreakSpec(LinearProcessSpec.ar(0.4), LinearProcessSpec.ar(0.8), 0.25),
    ]
    for spec in specs:
        assert process_from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    alias = {"noise": {"family": "gaussian", "mu": 0, "sigma": 2}, "model": {"kind": "ma", "coefficients": [0.4]}}
    assert process_from_dict(alias).noise == NoiseSpec.gaussian(0, 2)
    with pytest.raises(ConfigurationError):
        process_from_dict({"model": {}})


def test_derived_seeds_differ():
    seeds = {derive_seed(7, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
