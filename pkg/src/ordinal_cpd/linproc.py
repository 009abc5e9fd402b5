"""Seeded simulation of linear increment processes and their integrated paths.

Increments follow ``X_t = sum_j a_j Z_{t-j}`` with i.i.d. innovations ``Z``.
Moving-average and fractionally integrated models are computed by a finite
convolution; autoregressions by the recursion itself.  The random stream for
one call is fully determined by an integer seed, and independent
replications use :func:`derive_seed` so they can run in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import signal

from ._validation import as_series, check_int
from .exceptions import ConfigurationError

NOISE_FAMILIES = ("gaussian", "student_t", "laplace")
MODEL_KINDS = ("ma", "ar", "farima")

DEFAULT_BURN_IN = 1000
DEFAULT_TRUNCATION = 10_000


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(master_seed, *keys)``.

    Children of distinct key tuples draw from statistically independent
    streams, which is what makes replications order-independent.
    """
    seq = np.random.SeedSequence([int(master_seed) % 2**64, *(int(k) for k in keys)])
    hi, lo = seq.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class NoiseSpec:
    """Innovation distribution.

    ``gaussian`` uses ``loc``/``scale`` as mean and standard deviation,
    ``student_t`` uses ``df`` and ``laplace`` uses ``loc``/``scale``.
    """

    family: str = "gaussian"
    loc: float = 0.0
    scale: float = 1.0
    df: float | None = None

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ConfigurationError(f"unknown noise family {self.family!r}")
        if not np.isfinite(self.loc):
            raise ConfigurationError("noise location must be finite")
        if self.family == "student_t":
            if self.df is None or not self.df > 0:
                raise ConfigurationError("student_t noise needs df > 0")
        elif not self.scale > 0:
            raise ConfigurationError(f"{self.family} noise needs scale > 0")

    @classmethod
    def gaussian(cls, mu: float = 0.0, sigma: float = 1.0) -> "NoiseSpec":
        return cls("gaussian", loc=mu, scale=sigma)

    @classmethod
    def student_t(cls, df: float) -> "NoiseSpec":
        return cls("student_t", df=df)

    @classmethod
    def laplace(cls, loc: float = 0.0, scale: float = 1.0) -> "NoiseSpec":
        return cls("laplace", loc=loc, scale=scale)

    def to_dict(self) -> dict[str, Any]:
        if self.family == "student_t":
            return {"family": "student_t", "df": self.df}
        return {"family": self.family, "loc": self.loc, "scale": self.scale}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NoiseSpec":
        data = dict(data)
        family = data.pop("family", "gaussian")
        # accept the conventional parameter names as aliases
        if "mu" in data:
            data["loc"] = data.pop("mu")
        if "sigma" in data:
            data["scale"] = data.pop("sigma")
        unknown = set(data) - {"loc", "scale", "df"}
        if unknown:
            raise ConfigurationError(f"unknown noise fields: {sorted(unknown)}")
        return cls(family, **{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class LinearProcessSpec:
    """Increment model: ``ma`` (thetas), ``ar`` (phis) or ``farima`` (d, truncation)."""

    noise: NoiseSpec = field(default_factory=NoiseSpec)
    kind: str = "ma"
    coefficients: tuple[float, ...] = ()
    d: float | None = None
    truncation: int = DEFAULT_TRUNCATION
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        check_int(self.burn_in, "burn_in", minimum=0, error=ConfigurationError)
        if not all(np.isfinite(self.coefficients)):
            raise ConfigurationError("coefficients must be finite")
        if self.kind == "ar" and self.coefficients:
            # stationary iff all roots of the characteristic polynomial lie
            # inside the unit circle (|phi| < 1 for a single lag)
            roots = np.roots([1.0, *(-c for c in self.coefficients)])
            if np.any(np.abs(roots) >= 1.0):
                raise ConfigurationError(
                    f"AR coefficients {self.coefficients} are not stationary"
                )
        if self.kind == "farima":
            if self.d is None or not 0.0 < self.d < 0.5:
                raise ConfigurationError(f"farima needs 0 < d < 1/2, got d={self.d}")
            check_int(self.truncation, "truncation", minimum=1, error=ConfigurationError)

    @classmethod
    def ma(cls, *thetas: float, noise: NoiseSpec | None = None,
           burn_in: int = DEFAULT_BURN_IN) -> "LinearProcessSpec":
        return cls(noise or NoiseSpec(), "ma", thetas, burn_in=burn_in)

    @classmethod
    def ar(cls, *phis: float, noise: NoiseSpec | None = None,
           burn_in: int = DEFAULT_BURN_IN) -> "LinearProcessSpec":
        return cls(noise or NoiseSpec(), "ar", phis, burn_in=burn_in)

    @classmethod
    def farima(cls, d: float, truncation: int = DEFAULT_TRUNCATION,
               noise: NoiseSpec | None = None, burn_in: int = 0) -> "LinearProcessSpec":
        return cls(noise or NoiseSpec(), "farima", (), d=d, truncation=truncation,
                   burn_in=burn_in)

    @property
    def warmup(self) -> int:
        """Noise draws consumed before the first output to fill the filter memory."""
        if self.kind == "ma":
            return len(self.coefficients)
        if self.kind == "farima":
            return self.truncation
        return 0

    def to_dict(self) -> dict[str, Any]:
        model: dict[str, Any] = {"kind": self.kind}
        if self.kind == "farima":
            model.update(d=self.d, truncation=self.truncation)
        else:
            model["coefficients"] = list(self.coefficients)
        return {"noise": self.noise.to_dict(), "model": model, "burn_in": self.burn_in}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LinearProcessSpec":
        try:
            model = dict(data["model"])
            kind = model.pop("kind")
        except (KeyError, TypeError) as exc:
            raise ConfigurationError("process spec needs a model with a kind") from exc
        noise = NoiseSpec.from_dict(data.get("noise", {}))
        default_burn = 0 if kind == "farima" else DEFAULT_BURN_IN
        burn_in = data.get("burn_in", default_burn)
        if kind == "farima":
            return cls(noise, "farima", d=model.get("d"),
                       truncation=model.get("truncation", DEFAULT_TRUNCATION),
                       burn_in=burn_in)
        return cls(noise, kind, tuple(model.get("coefficients", ())), burn_in=burn_in)


@dataclass(frozen=True)
class BreakSpec:
    """Regime switch from ``pre`` to ``post`` after a fraction of the sample."""

    pre: LinearProcessSpec
    post: LinearProcessSpec
    break_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.break_fraction < 1.0:
            raise ConfigurationError(
                f"break_fraction must lie in (0, 1), got {self.break_fraction}"
            )
        if self.pre.noise != self.post.noise:
            raise ConfigurationError("pre- and post-break regimes must share the noise law")

    def break_index(self, n: int) -> int:
        return int(np.floor(n * self.break_fraction))

    def to_dict(self) -> dict[str, Any]:
        return {"pre": self.pre.to_dict(), "post": self.post.to_dict(),
                "break_fraction": self.break_fraction}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BreakSpec":
        try:
            return cls(LinearProcessSpec.from_dict(data["pre"]),
                       LinearProcessSpec.from_dict(data["post"]),
                       float(data.get("break_fraction", 0.5)))
        except KeyError as exc:
            raise ConfigurationError(f"break spec is missing {exc.args[0]!r}") from exc


def process_from_dict(data: dict[str, Any]) -> LinearProcessSpec | BreakSpec:
    if "pre" in data:
        return BreakSpec.from_dict(data)
    return LinearProcessSpec.from_dict(data)


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    origin: str | None = None
    sample_rate: float | None = None

    def __post_init__(self):
        arr = as_series(self.samples)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.samples, dtype=dtype)


def sample_noise(spec: NoiseSpec, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. innovations, reproducible for a fixed ``(spec, n, seed)``."""
    n = check_int(n, "n", minimum=0, error=ConfigurationError)
    rng = make_rng(seed)
    if spec.family == "gaussian":
        return rng.normal(spec.loc, spec.scale, n)
    if spec.family == "student_t":
        return spec.loc + rng.standard_t(spec.df, n)
    return rng.laplace(spec.loc, spec.scale, n)


def farima_coefficients(d: float, J: int) -> np.ndarray:
    """MA(infinity) weights of ``(1 - B)^(-d)`` up to lag ``J``.

    >>> farima_coefficients(0.3, 2)
    array([1.   , 0.3  , 0.195])
    """
    if not 0.0 < d < 0.5:
        raise ConfigurationError(f"d must lie in (0, 1/2), got {d}")
    J = check_int(J, "J", minimum=0, error=ConfigurationError)
    j = np.arange(1, J + 1, dtype=np.float64)
    return np.concatenate(([1.0], np.cumprod((j - 1.0 + d) / j)))


def lrd_variance_constant(d: float) -> float:
    """``Gamma(d)^2 / (Gamma(2d + 2) cos(pi d))``, the long-memory variance factor."""
    from scipy.special import gamma

    if not 0.0 < d < 0.5:
        raise ConfigurationError(f"d must lie in (0, 1/2), got {d}")
    return float(gamma(d) ** 2 / (gamma(2 * d + 2) * np.cos(np.pi * d)))


def _filter(spec: LinearProcessSpec, z: np.ndarray, warmup: int) -> np.ndarray:
    """Apply ``spec`` to a noise stream whose first ``warmup`` draws are pre-sample.

    Returns one output per draw after the warm-up.
    """
    if spec.kind == "ar":
        a = np.concatenate(([1.0], -np.asarray(spec.coefficients)))
        return signal.lfilter([1.0], a, z[warmup:])
    if spec.kind == "ma":
        b = np.concatenate(([1.0], spec.coefficients))
    else:
        b = farima_coefficients(spec.d, spec.truncation)
    full = z[warmup - (b.size - 1):]
    if b.size > 64:
        return signal.fftconvolve(full, b, mode="valid")
    return np.convolve(full, b, mode="valid")


def simulate_increments(spec: LinearProcessSpec, n: int, seed) -> TimeSeries:
    """``n`` increments of ``spec`` after discarding ``spec.burn_in`` samples."""
    n = check_int(n, "n", minimum=1, error=ConfigurationError)
    warmup = spec.warmup
    z = sample_noise(spec.noise, warmup + spec.burn_in + n, seed)
    x = _filter(spec, z, warmup)[spec.burn_in:]
    return TimeSeries(x, origin=f"{spec.kind} increments")


def simulate_with_break(spec: BreakSpec, n: int, seed) -> TimeSeries:
    """Increments whose dynamics switch after ``floor(n * break_fraction)`` samples.

    Both regimes read the same noise stream; an autoregressive post-break
    regime continues from the last pre-break values.
    """
    n = check_int(n, "n", minimum=2, error=ConfigurationError)
    pre, post = spec.pre, spec.post
    if pre == post:
        return TimeSeries(simulate_increments(pre, n, seed).samples,
                          origin="increments with break")
    warmup = max(pre.warmup, post.warmup)
    burn = pre.burn_in
    z = sample_noise(pre.noise, warmup + burn + n, seed)
    split = burn + spec.break_index(n)
    x_pre = _filter(pre, z, warmup)[:split]
    if post.kind == "ar":
        p = len(post.coefficients)
        a = np.concatenate(([1.0], -np.asarray(post.coefficients)))
        history = x_pre[::-1][:p]
        history = np.pad(history, (0, p - history.size))
        zi = signal.lfiltic([1.0], a, history)
        x_post, _ = signal.lfilter([1.0], a, z[warmup + split:], zi=zi)
    else:
        x_post = _filter(post, z, warmup)[split:]
    x = np.concatenate((x_pre, x_post))[burn:]
    return TimeSeries(x, origin="increments with break")


def simulate(spec: LinearProcessSpec | BreakSpec, n: int, seed) -> TimeSeries:
    if isinstance(spec, BreakSpec):
        return simulate_with_break(spec, n, seed)
    return simulate_increments(spec, n, seed)


def integrate(increments, xi0: float = 0.0) -> TimeSeries:
    """Path ``xi`` with ``xi[0] = xi0`` and ``diff(xi) == increments``."""
    x = as_series(increments, name="increments")
    return TimeSeries(np.concatenate(([float(xi0)], float(xi0) + np.cumsum(x))))
