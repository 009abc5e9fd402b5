"""Monte Carlo experiments: estimator rates, pattern symmetries, test size and power.

Every replication draws from ``derive_seed(master_seed, ...)`` keyed by the
cell it belongs to, so rerunning an experiment with the same master seed
reproduces its tables exactly, whatever order the cells are visited in.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import signal

from ._validation import check_alpha, check_int
from .cpd import (
    BLOCK_EXPONENT,
    DEFAULT_GRID,
    NullQuantileTable,
    null_quantiles,
    run_test,
)
from .estimate import TURNING_PATTERNS, turning_indicator
from .exceptions import ConfigurationError
from .ordpat import Pattern, as_pattern, code_of, enumerate_patterns, pattern_codes
from .linproc import (
    BreakSpec,
    LinearProcessSpec,
    NoiseSpec,
    derive_seed,
    integrate,
    process_from_dict,
    simulate,
)

log = logging.getLogger(__name__)

TABLE1_NOISES = (NoiseSpec.gaussian(0.0, 1.0), NoiseSpec.student_t(2.0),
                 NoiseSpec.laplace(0.0, 4.0))
TABLE1_SIZES = (500, 1000, 2000)
TABLE1_FRACTIONS = (0.1, 0.25, 0.5)
FIG3_H = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class BlockRule:
    """Either a fixed block parameter ``m`` or ``m = ceil(n ** exponent)``."""

    fixed: int | None = None
    exponent: float = BLOCK_EXPONENT

    def m_for(self, n: int) -> int:
        if self.fixed is not None:
            return self.fixed
        return max(1, math.ceil(n ** self.exponent))

    def to_dict(self) -> dict[str, Any]:
        return {"fixed": self.fixed} if self.fixed is not None else {"exponent": self.exponent}

    @classmethod
    def from_dict(cls, data) -> "BlockRule":
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            return cls(fixed=int(data))
        data = data or {}
        if data.get("fixed") is not None:
            return cls(fixed=check_int(data["fixed"], "block_rule.fixed", minimum=1,
                                       error=ConfigurationError))
        return cls(exponent=float(data.get("exponent", BLOCK_EXPONENT)))


def noise_label(noise: NoiseSpec) -> str:
    if noise.family == "gaussian":
        return f"N({noise.loc:g},{noise.scale:g})"
    if noise.family == "student_t":
        return f"t_{noise.df:g}"
    return f"Lap({noise.loc:g},{noise.scale:g})"


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by the harness experiments.

    ``process_role`` says whether the simulated series are the increments of
    the observed path (the default) or the observed path itself.
    ``replications`` is either 0 (a dry run) or at least 100.
    """

    name: str = "experiment"
    process: LinearProcessSpec | BreakSpec | None = None
    sample_sizes: tuple[int, ...] = (1000,)
    replications: int = 1000
    block_rule: BlockRule = field(default_factory=BlockRule)
    alpha: float = 0.05
    master_seed: int = 0
    output_dir: str | None = None
    process_role: str = "increments"
    # power and histogram settings
    phi1: float = 0.4
    h_values: tuple[float, ...] = (0.4,)
    break_fractions: tuple[float, ...] = TABLE1_FRACTIONS
    noises: tuple[NoiseSpec, ...] = TABLE1_NOISES
    post_coefficients: tuple[float, ...] = (0.7,)
    quantile_grid: int = DEFAULT_GRID
    quantile_reps: int = 20_000
    quantile_seed: int = 1

    def __post_init__(self):
        reps = check_int(self.replications, "replications", minimum=0, error=ConfigurationError)
        if 0 < reps < 100:
            raise ConfigurationError(f"replications must be 0 or at least 100, got {reps}")
        sizes = tuple(check_int(n, "sample size", minimum=3, error=ConfigurationError)
                      for n in self.sample_sizes)
        if not sizes:
            raise ConfigurationError("sample_sizes must not be empty")
        object.__setattr__(self, "sample_sizes", sizes)
        object.__setattr__(self, "h_values", tuple(float(h) for h in self.h_values))
        object.__setattr__(self, "break_fractions", tuple(float(f) for f in self.break_fractions))
        object.__setattr__(self, "post_coefficients",
                           tuple(float(c) for c in self.post_coefficients))
        check_alpha(self.alpha)
        if self.process_role not in ("increments", "levels"):
            raise ConfigurationError("process_role must be 'increments' or 'levels'")

    def require_increasing_sizes(self):
        if any(b <= a for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
            raise ConfigurationError("sample sizes must be strictly increasing")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "process": self.process.to_dict() if self.process is not None else None,
            "process_role": self.process_role,
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "block_rule": self.block_rule.to_dict(),
            "alpha": self.alpha,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "phi1": self.phi1,
            "h_values": list(self.h_values),
            "break_fractions": list(self.break_fractions),
            "noises": [n.to_dict() for n in self.noises],
            "post_coefficients": list(self.post_coefficients),
            "quantile_grid": self.quantile_grid,
            "quantile_reps": self.quantile_reps,
            "quantile_seed": self.quantile_seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        kwargs: dict[str, Any] = {}
        if data.get("process") is not None:
            kwargs["process"] = process_from_dict(data.pop("process"))
        else:
            data.pop("process", None)
        if "block_rule" in data:
            kwargs["block_rule"] = BlockRule.from_dict(data.pop("block_rule"))
        if "noises" in data:
            kwargs["noises"] = tuple(NoiseSpec.from_dict(n) for n in data.pop("noises"))
        for key in ("sample_sizes", "h_values", "break_fractions", "post_coefficients"):
            if key in data:
                kwargs[key] = tuple(data.pop(key))
        allowed = {"name", "replications", "alpha", "master_seed", "output_dir",
                   "process_role", "phi1", "quantile_grid", "quantile_reps", "quantile_seed"}
        unknown = set(data) - allowed - {"experiment", "pattern", "regime", "d", "parameters",
                                         "model"}
        if unknown:
            raise ConfigurationError(f"unknown experiment fields: {sorted(unknown)}")
        kwargs.update({k: v for k, v in data.items() if k in allowed})
        return cls(**kwargs)


def _path(config: ExperimentConfig, spec, n: int, seed: int) -> np.ndarray:
    x = simulate(spec, n, seed).samples
    if config.process_role == "levels":
        return x
    return integrate(x).samples


# -- estimator rates --------------------------------------------------------

@dataclass(frozen=True)
class RateFitResult:
    sample_sizes: tuple[int, ...]
    std_devs: tuple[float, ...]
    fitted_exponent: float
    r_squared: float
    target_exponent: float
    reference_probability: float

    @property
    def flagged(self) -> bool:
        """True when the log-log fit is too poor to trust the exponent."""
        return self.r_squared < 0.9

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "std_p_hat"])
        for n, s in zip(self.sample_sizes, self.std_devs):
            w.writerow([n, repr(s)])
        return buf.getvalue()


def fit_log_log(sizes: Sequence[int], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and R^2 of ``log(values)`` on ``log(sizes)``."""
    lx, ly = np.log(np.asarray(sizes, float)), np.log(np.asarray(values, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(min(max(r2, 0.0), 1.0))


def _frequency(path: np.ndarray, pattern: Pattern) -> float:
    return float(np.mean(pattern_codes(path, pattern.order) == code_of(pattern)))


def clt_rate_experiment(config: ExperimentConfig, pattern=(0, 1, 2),
                        regime: str | tuple = "srd") -> RateFitResult:
    """Log-log slope of the spread of a pattern frequency against sample size.

    ``regime`` is ``"srd"`` (target slope -1/2) or ``("lrd", d)`` (target
    ``-(1/2 - d)``); the latter requires FARIMA increments with the same ``d``.
    """
    pattern = as_pattern(pattern)
    spec = config.process
    if spec is None or isinstance(spec, BreakSpec):
        raise ConfigurationError("a rate experiment needs a stationary process")
    config.require_increasing_sizes()
    is_lrd_input = spec.kind == "farima" and config.process_role == "increments"
    if regime == "srd":
        if is_lrd_input:
            raise ConfigurationError("FARIMA increments are long-range dependent, not 'srd'")
        target = -0.5
    else:
        try:
            label, d = regime
        except (TypeError, ValueError):
            raise ConfigurationError(f"unknown regime {regime!r}") from None
        if label != "lrd" or not is_lrd_input or not math.isclose(spec.d, d):
            raise ConfigurationError(f"regime {regime!r} needs FARIMA increments with d={d}")
        target = -(0.5 - d)
    if config.replications < 2:
        raise ConfigurationError("a rate experiment needs replications")

    stds = []
    for n in config.sample_sizes:
        freqs = [_frequency(_path(config, spec, n, derive_seed(config.master_seed, n, r)),
                            pattern) for r in range(config.replications)]
        stds.append(float(np.std(freqs, ddof=1)))
    slope, r2 = fit_log_log(config.sample_sizes, stds)
    n_ref = 10 * config.sample_sizes[-1]
    reference = _frequency(_path(config, spec, n_ref, derive_seed(config.master_seed, n_ref, 0)),
                           pattern)
    result = RateFitResult(config.sample_sizes, tuple(stds), slope, r2, target, reference)
    if result.flagged:
        log.warning("rate fit for %s has R^2 = %.3f < 0.9", pattern, r2)
    return result


# -- pattern symmetries -----------------------------------------------------

def gaussian_symmetry_experiment(config: ExperimentConfig,
                                 order: int = 2) -> dict[Pattern, tuple[float, float]]:
    """Mean frequency and Monte Carlo standard error of every pattern.

    Uses the largest configured sample size.
    """
    spec = config.process
    if spec is None or isinstance(spec, BreakSpec):
        raise ConfigurationError("a symmetry experiment needs a stationary process")
    if spec.noise.family != "gaussian":
        log.info("non-Gaussian innovations: symmetry results are informational only")
    n = config.sample_sizes[-1]
    patterns = enumerate_patterns(order)
    codes = np.array([code_of(p) for p in patterns])
    freqs = np.empty((config.replications, len(patterns)))
    for r in range(config.replications):
        c = pattern_codes(_path(config, spec, n, derive_seed(config.master_seed, n, r)), order)
        freqs[r] = np.mean(c[:, None] == codes[None, :], axis=0)
    if config.replications == 0:
        return {p: (math.nan, math.nan) for p in patterns}
    mean = freqs.mean(axis=0)
    se = freqs.std(axis=0, ddof=1) / math.sqrt(config.replications)
    return {p: (float(m), float(s)) for p, m, s in zip(patterns, mean, se)}


def symmetry_holds(result: dict[Pattern, tuple[float, float]], n_se: float = 3.0) -> bool:
    """Monotone pair and the four turning patterns agree within ``n_se`` errors."""
    def close(a: Pattern, b: Pattern) -> bool:
        (ma, sa), (mb, sb) = result[a], result[b]
        return abs(ma - mb) <= n_se * math.hypot(sa, sb)

    turning = sorted(TURNING_PATTERNS)
    up, down = Pattern((0, 1, 2)), Pattern((2, 1, 0))
    return close(up, down) and all(close(a, b) for i, a in enumerate(turning)
                                   for b in turning[i + 1:])


def negation_symmetry_holds(result: dict[Pattern, tuple[float, float]],
                            n_se: float = 3.0) -> bool:
    """Each pattern matches its mirror image ``r - rank`` within ``n_se`` errors.

    This is the symmetry left for symmetric but non-Gaussian innovations.
    """
    for p, (mp, sp) in result.items():
        mirror = Pattern(tuple(p.order - v for v in p.ranks))
        mq, sq = result[mirror]
        if abs(mp - mq) > n_se * math.hypot(sp, sq):
            return False
    return True


# -- spectral centroid --------------------------------------------------------

def theoretical_rho1(spec: LinearProcessSpec, horizon: int = 5000) -> float:
    """Lag-one autocorrelation of a stationary linear increment process."""
    if spec.kind == "ma":
        psi = np.concatenate(([1.0], spec.coefficients))
    elif spec.kind == "ar":
        impulse = np.zeros(horizon)
        impulse[0] = 1.0
        psi = signal.lfilter([1.0], np.concatenate(([1.0], -np.asarray(spec.coefficients))),
                             impulse)
    else:
        d = spec.d
        return d / (1.0 - d)
    return float(psi[:-1] @ psi[1:] / (psi @ psi))


def centroid_experiment(config: ExperimentConfig, parameters: Sequence[float] = (0.0, 0.4),
                        kind: str = "ma") -> list[dict[str, float]]:
    """Compare ``cos(pi * mean turning rate)`` with the lag-one autocorrelation.

    One row per MA(1) ``theta`` or AR(1) ``phi`` in ``parameters``, with
    Gaussian innovations and the largest configured sample size.
    """
    if kind not in ("ma", "ar"):
        raise ConfigurationError("centroid experiments use 'ma' or 'ar' increments")
    n = config.sample_sizes[-1]
    rows = []
    for i, value in enumerate(parameters):
        spec = LinearProcessSpec(NoiseSpec.gaussian(), kind, (float(value),))
        qs = [float(turning_indicator(_path(config, spec, n,
                                            derive_seed(config.master_seed, i, r))).mean())
              for r in range(max(config.replications, 1))]
        q_bar = float(np.mean(qs))
        rho = theoretical_rho1(spec)
        rows.append({"parameter": float(value), "mean_q": q_bar,
                     "cos_pi_q": math.cos(math.pi * q_bar), "rho1": rho,
                     "abs_diff": abs(math.cos(math.pi * q_bar) - rho)})
    return rows


# -- size and power -----------------------------------------------------------

def _table(config: ExperimentConfig, quantiles: NullQuantileTable | None) -> NullQuantileTable:
    if quantiles is not None:
        return quantiles
    return null_quantiles("sn_cusum", (config.alpha,), config.quantile_grid,
                          config.quantile_reps, config.quantile_seed)


def rejection_rate(config: ExperimentConfig, spec, n: int, quantiles: NullQuantileTable,
                   seed_keys: tuple[int, ...], block_m: int | None = None) -> float:
    """Percentage of replications in which the test rejects."""
    if config.replications == 0:
        return math.nan
    rejected = 0
    for r in range(config.replications):
        path = _path(config, spec, n, derive_seed(config.master_seed, *seed_keys, r))
        m = block_m if block_m is not None else config.block_rule.m_for(path.size)
        rejected += run_test(path, m, config.alpha, quantiles).reject
    return 100.0 * rejected / config.replications


def power_table(config: ExperimentConfig,
                quantiles: NullQuantileTable | None = None) -> list[dict[str, Any]]:
    """Rejection percentages of AR(1) increments whose coefficient jumps by ``h``.

    The grid is every combination of sample size, break fraction, noise law
    and ``h`` in the configuration; ``h = 0`` gives the empirical size.
    """
    table = _table(config, quantiles)
    rows = []
    for n in config.sample_sizes:
        for fi, frac in enumerate(config.break_fractions):
            for ni, noise in enumerate(config.noises):
                for hi, h in enumerate(config.h_values):
                    pre = LinearProcessSpec(noise, "ar", (config.phi1,))
                    post = LinearProcessSpec(noise, "ar", (config.phi1 + h,))
                    spec = BreakSpec(pre, post, frac)
                    pct = rejection_rate(config, spec, n, table, (n, fi, ni, hi))
                    rows.append({"n": n, "break": spec.break_index(n), "break_fraction": frac,
                                 "noise": noise_label(noise), "h": h,
                                 "block_m": config.block_rule.m_for(n + 1),
                                 "rejection_pct": pct})
    return rows


def table1_layout(rows: list[dict[str, Any]]) -> list[list[Any]]:
    """Pivot power rows into the layout ``break, noise_1, noise_2, ...`` per ``n``.

    Returns a header row followed by one row per break fraction; each sample
    size contributes a block of columns.
    """
    sizes = sorted({r["n"] for r in rows})
    noises = list(dict.fromkeys(r["noise"] for r in rows))
    fractions = sorted({r["break_fraction"] for r in rows})
    lookup = {(r["n"], r["break_fraction"], r["noise"]): r for r in rows}
    header = []
    for n in sizes:
        header += [f"n={n} break"] + [f"n={n} {lab}" for lab in noises]
    out = [header]
    for frac in fractions:
        line = []
        for n in sizes:
            cells = [lookup.get((n, frac, lab)) for lab in noises]
            brk = next((c["break"] for c in cells if c is not None), "")
            line += [brk] + [round(c["rejection_pct"], 1) if c else "" for c in cells]
        out.append(line)
    return out


def block_size_sweep(config: ExperimentConfig, spec, n: int, block_sizes: Sequence[int],
                     quantiles: NullQuantileTable | None = None) -> list[dict[str, Any]]:
    """Rejection percentage of one cell across alternative block parameters."""
    table = _table(config, quantiles)
    return [{"n": n, "block_m": m, "n_b": (n + 1) // (m + 2),
             "rejection_pct": rejection_rate(config, spec, n, table, (n, 7919, m), m)}
            for m in block_sizes]


# -- null histogram -----------------------------------------------------------

@dataclass(frozen=True)
class StatisticSample:
    null: np.ndarray
    alternative: np.ndarray
    block_m: int

    def null_quantile(self, level: float = 0.95) -> float:
        return float(np.quantile(self.null, level)) if self.null.size else math.nan

    def histogram_csv(self, bins: int = 40) -> str:
        both = np.concatenate((self.null, self.alternative))
        edges = np.histogram_bin_edges(both, bins=bins)
        h0, _ = np.histogram(self.null, edges)
        h1, _ = np.histogram(self.alternative, edges)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["left_edge", "right_edge", "count_null", "count_break"])
        for a, b, c0, c1 in zip(edges[:-1], edges[1:], h0, h1):
            w.writerow([repr(float(a)), repr(float(b)), int(c0), int(c1)])
        return buf.getvalue()


def null_statistic_histogram(config: ExperimentConfig) -> StatisticSample:
    """Self-normalized statistics without and with a moving-average break.

    The null process is ``config.process`` (default MA(1), theta = 0.4); the
    alternative switches its coefficients to ``config.post_coefficients``
    halfway through.
    """
    from .cpd import sn_cusum_statistic
    from .estimate import turning_rate_series

    spec = config.process or LinearProcessSpec.ma(0.4)
    if not isinstance(spec, LinearProcessSpec) or spec.kind != "ma":
        raise ConfigurationError("the histogram experiment needs MA increments")
    alt = BreakSpec(spec, LinearProcessSpec(spec.noise, "ma", config.post_coefficients,
                                            burn_in=spec.burn_in), 0.5)
    n = config.sample_sizes[-1]
    m = config.block_rule.m_for(n + 1)
    out = []
    for key, model in ((0, spec), (1, alt)):
        values = []
        for r in range(config.replications):
            path = _path(config, model, n, derive_seed(config.master_seed, key, r))
            values.append(sn_cusum_statistic(turning_rate_series(path, m))[0])
        out.append(np.asarray(values, dtype=np.float64))
    return StatisticSample(out[0], out[1], m)
