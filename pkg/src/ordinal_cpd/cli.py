"""Command-line interface.

Every subcommand computes its outputs in memory, stages them next to their
destination and publishes them together with a JSON manifest, so an error
never leaves partial files and ``replay`` can rebuild any run.

Exit status: 0 on success (for ``detect``: no change found), 2 when
``detect`` rejects the null hypothesis, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from . import cpd, harness
from .dataio import (
    InputFormatError,
    StagedOutputs,
    build_manifest,
    cached_quantiles,
    csv_text,
    read_series,
    sha256_file,
    utc_now,
    write_json_atomic,
)
from .estimate import pattern_frequencies, turning_rate_series
from .exceptions import ConfigurationError, InvalidInputError, OrdinalCPDError
from .linproc import (
    BreakSpec,
    LinearProcessSpec,
    NoiseSpec,
    integrate,
    process_from_dict,
    simulate,
)
from .ordpat import count_patterns

log = logging.getLogger("ordinal_cpd")

EXIT_OK, EXIT_ERROR, EXIT_CHANGE = 0, 1, 2


@dataclass
class Result:
    files: dict[str, str] = field(default_factory=dict)
    stdout: str = ""
    exit_code: int = EXIT_OK
    config: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    manifest: str | None = None


# -- schemas -------------------------------------------------------------------

_NUM_LIST = {"type": "array", "items": {"type": "number"}}
_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1}
_NOISE = {
    "type": "object",
    "properties": {"family": {"enum": ["gaussian", "student_t", "laplace"]},
                   "loc": {"type": "number"}, "scale": {"type": "number", "exclusiveMinimum": 0},
                   "df": {"type": "number", "exclusiveMinimum": 0},
                   "mu": {"type": "number"}, "sigma": {"type": "number", "exclusiveMinimum": 0}},
    "required": ["family"],
    "additionalProperties": False,
}

QUANTILES_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(cpd.KINDS)},
        "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                              "exclusiveMaximum": 1}, "minItems": 1},
        "grid_size": {"type": "integer", "minimum": 100},
        "replications": {"type": "integer", "minimum": 1000},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": ["power", "rate", "symmetry", "centroid", "histogram"]},
        "name": {"type": "string"},
        "process": {"type": ["object", "null"]},
        "process_role": {"enum": ["increments", "levels"]},
        "sample_sizes": _INT_LIST,
        "replications": {"type": "integer", "minimum": 0},
        "block_rule": {"type": ["object", "integer"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": ["string", "null"]},
        "phi1": {"type": "number"},
        "h_values": _NUM_LIST,
        "break_fractions": {"type": "array",
                            "items": {"type": "number", "exclusiveMinimum": 0,
                                      "exclusiveMaximum": 1}},
        "noises": {"type": "array", "items": _NOISE, "minItems": 1},
        "post_coefficients": _NUM_LIST,
        "quantile_grid": {"type": "integer", "minimum": 100},
        "quantile_reps": {"type": "integer", "minimum": 1000},
        "quantile_seed": {"type": "integer", "minimum": 0},
        "pattern": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "regime": {"oneOf": [{"const": "srd"},
                             {"type": "object", "properties": {"lrd": {"type": "number"}},
                              "required": ["lrd"], "additionalProperties": False}]},
        "parameters": _NUM_LIST,
        "model": {"enum": ["ma", "ar"]},
    },
    "additionalProperties": False,
}


def load_config(path: str, schema: dict) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            pointer = "/" + "/".join(str(p) for p in err.absolute_path)
            lines.append(f"  {pointer}: {err.message}")
        raise ConfigurationError(f"{path}: invalid configuration\n" + "\n".join(lines))
    return data


# -- commands -----------------------------------------------------------------

def _input(args) -> Any:
    column = args.column
    if column is not None and column.isdigit():
        column = int(column)
    return read_series(args.input, column)


def cmd_patterns(args) -> Result:
    r = args.order - 1
    if r < 1:
        raise InvalidInputError("--order counts values per pattern and must be at least 2")
    x = _input(args)
    if x.size < r + 1:
        raise InvalidInputError(
            f"input has {x.size} samples, fewer than order+1 = {r + 1} needed for patterns "
            f"of {args.order} values"
        )
    counts = count_patterns(x, r)
    freqs = pattern_frequencies(x, r) if args.all_patterns else counts.frequencies()
    rows = [(str(p), counts.counts.get(p, 0), f) for p, f in sorted(freqs.items())]
    if args.format == "json":
        text = json.dumps({"order": args.order, "total_windows": counts.total_windows,
                           "patterns": [{"pattern": list(p.ranks), "count": counts.counts.get(p, 0),
                                         "frequency": f} for p, f in sorted(freqs.items())]},
                          indent=2) + "\n"
    else:
        text = csv_text(["pattern", "count", "frequency"],
                        [(str(p), c, float(f)) for p, c, f in rows])
    return _emit(args, text, {"order": args.order, "input": args.input})


def cmd_turning_rate(args) -> Result:
    x = _input(args)
    m = args.block_size
    if m < 1:
        raise InvalidInputError("--block-size must be at least 1")
    if x.size < m + 2:
        raise InvalidInputError(f"input has {x.size} samples, shorter than one block of {m + 2}")
    text = turning_rate_series(x, m).to_csv()
    return _emit(args, text, {"block_m": m, "input": args.input})


def _block_size(args, n: int) -> int:
    if args.block_size is not None:
        return args.block_size
    rule = args.block_rule.replace(" ", "")
    if not rule.startswith("n^"):
        raise ConfigurationError(f"--block-rule must look like n^0.6, got {args.block_rule!r}")
    try:
        exponent = float(rule[2:])
    except ValueError:
        raise ConfigurationError(f"bad exponent in --block-rule {args.block_rule!r}") from None
    if not 0.0 < exponent < 1.0:
        raise ConfigurationError("--block-rule exponent must lie in (0, 1)")
    return cpd.default_block_size(n, exponent)


def cmd_detect(args) -> Result:
    if not 0.0 < args.alpha < 1.0:
        raise ConfigurationError(f"--alpha must lie in (0, 1), got {args.alpha}")
    x = _input(args)
    m = _block_size(args, x.size)
    table = cached_quantiles("sn_cusum", args.grid, args.mc_reps, args.seed, (args.alpha,),
                             args.cache_dir, args.threads)
    report = cpd.run_test(x, m, args.alpha, table)
    body = report.to_dict()
    body.update(n=int(x.size), input=args.input,
                quantile_table={"grid_size": table.grid_size,
                                "replications": table.replications, "seed": table.seed})
    text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    config = {"alpha": args.alpha, "block_m": m, "grid": args.grid, "mc_reps": args.mc_reps,
              "input": args.input}
    result = _emit(args, text, config, seed=args.seed)
    result.exit_code = EXIT_CHANGE if report.reject else EXIT_OK
    return result


def _noise_from_args(args) -> NoiseSpec:
    if args.noise == "gaussian":
        return NoiseSpec.gaussian(args.loc, args.scale)
    if args.noise == "t":
        return NoiseSpec.student_t(args.df)
    return NoiseSpec.laplace(args.loc, args.scale)


def _model_from_args(args) -> LinearProcessSpec | BreakSpec:
    if args.spec:
        return process_from_dict(load_config(args.spec, {"type": "object"}))
    noise = _noise_from_args(args)
    burn = args.burn_in

    def need(name):
        value = getattr(args, name)
        if value is None:
            raise ConfigurationError(f"--model {args.model} needs --{name.replace('_', '-')}")
        return value

    if args.model == "ma1":
        return LinearProcessSpec(noise, "ma", (need("theta"),), burn_in=burn)
    if args.model == "ar1":
        return LinearProcessSpec(noise, "ar", (need("phi"),), burn_in=burn)
    if args.model == "farima":
        return LinearProcessSpec(noise, "farima", d=need("d"), truncation=args.truncation,
                                 burn_in=0)
    if args.model == "ma1-break":
        return BreakSpec(LinearProcessSpec(noise, "ma", (need("theta1"),), burn_in=burn),
                         LinearProcessSpec(noise, "ma", (need("theta2"),), burn_in=burn),
                         args.break_frac)
    return BreakSpec(LinearProcessSpec(noise, "ar", (need("phi1"),), burn_in=burn),
                     LinearProcessSpec(noise, "ar", (need("phi2"),), burn_in=burn),
                     args.break_frac)


def cmd_simulate(args) -> Result:
    spec = _model_from_args(args)
    x = simulate(spec, args.n, args.seed).samples
    if args.columns == "increments":
        text = csv_text(["increment"], ((float(v),) for v in x))
    elif args.columns == "path":
        text = csv_text(["xi"], ((float(v),) for v in integrate(x).samples))
    else:
        xi = integrate(x).samples
        text = csv_text(["increment", "xi"],
                        ((float(a), float(b)) for a, b in zip(x, xi[1:])))
    return _emit(args, text, {"process": spec.to_dict(), "n": args.n, "columns": args.columns},
                 seed=args.seed)


def cmd_quantiles(args) -> Result:
    conf = load_config(args.config, QUANTILES_SCHEMA) if args.config else {}
    kind = conf.get("kind", args.kind)
    alphas = conf.get("alphas", args.alphas)
    grid = conf.get("grid_size", args.grid)
    reps = conf.get("replications", args.reps)
    seed = conf.get("seed", args.seed)
    threads = conf.get("threads", args.threads)
    table = cpd.null_quantiles(kind, alphas, grid, reps, seed, threads)
    out = Path(args.output_dir)
    files = {
        str(out / "quantiles.json"): json.dumps(table.to_dict(), indent=1) + "\n",
        str(out / "quantiles.csv"): csv_text(["alpha", "critical_value"],
                                             sorted(table.quantiles.items())),
    }
    config = {"kind": kind, "alphas": list(alphas), "grid_size": grid, "replications": reps,
              "seed": seed}
    return Result(files=files, config=config, seed=seed,
                  stdout=csv_text(["alpha", "critical_value"], sorted(table.quantiles.items())),
                  manifest=str(out / "manifest.json"))


def _experiment_config(args) -> tuple[dict, harness.ExperimentConfig]:
    raw = load_config(args.config, EXPERIMENT_SCHEMA)
    return raw, harness.ExperimentConfig.from_dict(raw)


def _out_dir(args, config: harness.ExperimentConfig) -> Path:
    target = args.output_dir or config.output_dir
    if not target:
        raise ConfigurationError("no output directory: pass --output-dir or set output_dir")
    return Path(target)


def cmd_power(args) -> Result:
    raw, config = _experiment_config(args)
    out = _out_dir(args, config)
    rows = harness.power_table(config)
    keys = ["n", "break", "break_fraction", "noise", "h", "block_m", "rejection_pct"]
    long_csv = csv_text(keys, ([r[k] for k in keys] for r in rows))
    layout = harness.table1_layout(rows)
    wide_csv = csv_text([str(h) for h in layout[0]], layout[1:])
    files = {str(out / "power.csv"): long_csv, str(out / "table1.csv"): wide_csv}
    return Result(files=files, config=raw, seed=config.master_seed, stdout=wide_csv,
                  manifest=str(out / "manifest.json"))


def cmd_experiment(args) -> Result:
    raw, config = _experiment_config(args)
    out = _out_dir(args, config)
    kind = raw.get("experiment", "power")
    files: dict[str, str] = {}
    if kind == "power":
        return cmd_power(args)
    if kind == "rate":
        regime = raw.get("regime", "srd")
        if isinstance(regime, dict):
            regime = ("lrd", regime["lrd"])
        fit = harness.clt_rate_experiment(config, raw.get("pattern", [0, 1, 2]), regime)
        files[str(out / "rate.csv")] = fit.to_csv()
        files[str(out / "rate_fit.json")] = json.dumps({
            "fitted_exponent": fit.fitted_exponent, "r_squared": fit.r_squared,
            "target_exponent": fit.target_exponent, "flagged": fit.flagged,
            "reference_probability": fit.reference_probability}, indent=2) + "\n"
    elif kind == "symmetry":
        res = harness.gaussian_symmetry_experiment(config)
        files[str(out / "symmetry.csv")] = csv_text(
            ["pattern", "mean_frequency", "mc_se"],
            ((str(p), m, s) for p, (m, s) in sorted(res.items())))
    elif kind == "centroid":
        rows = harness.centroid_experiment(config, raw.get("parameters", [0.0, 0.4]),
                                           raw.get("model", "ma"))
        keys = ["parameter", "mean_q", "cos_pi_q", "rho1", "abs_diff"]
        files[str(out / "centroid.csv")] = csv_text(keys, ([r[k] for k in keys] for r in rows))
    else:
        sample = harness.null_statistic_histogram(config)
        if sample.null.size:
            files[str(out / "histogram.csv")] = sample.histogram_csv()
            files[str(out / "statistics.csv")] = csv_text(
                ["replication", "sn_null", "sn_break"],
                ((i, float(a), float(b)) for i, (a, b) in enumerate(zip(sample.null,
                                                                          sample.alternative))))
    manifest = str(out / "manifest.json") if files else None
    return Result(files=files, config=raw, seed=config.master_seed, manifest=manifest)


def cmd_replay(args) -> Result:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        manifest["argv"], manifest["outputs"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"{args.manifest} is not a run manifest") from exc
    with _chdir(manifest.get("cwd", ".")):
        code = main(manifest["argv"], _replaying=True)
        mismatched = [o["path"] for o in manifest["outputs"]
                      if not Path(o["path"]).exists() or sha256_file(o["path"]) != o["sha256"]]
    if code not in (EXIT_OK, EXIT_CHANGE):
        raise OrdinalCPDError(f"replayed command failed with exit status {code}")
    if mismatched:
        print("outputs differ from the manifest: " + ", ".join(mismatched), file=sys.stderr)
        return Result(exit_code=EXIT_ERROR)
    # the replayed run's own status (e.g. 2 for a detected change) is not
    # an outcome of the replay, which succeeded
    return Result(stdout=f"replayed {len(manifest['outputs'])} output(s); all identical\n")


@contextmanager
def _chdir(path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


def _emit(args, text: str, config: dict, seed: int | None = None) -> Result:
    """Route a single text output to ``--output`` (plus manifest) or stdout."""
    if args.output:
        manifest = args.manifest or f"{args.output}.manifest.json"
        return Result(files={args.output: text}, config=config, seed=seed, manifest=manifest)
    return Result(stdout=text, config=config, seed=seed, manifest=args.manifest)


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordinal-cpd",
        description="Ordinal-pattern turning rates and change-point tests for time series.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_input(p):
        p.add_argument("input", help="one numeric value per line (optional header)")
        p.add_argument("--column", default=None,
                       help="column name or 0-based index for multi-column CSV")

    def with_output(p):
        p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
        p.add_argument("--manifest", default=None, help="manifest path")

    p = sub.add_parser("patterns", help="ordinal pattern counts and frequencies")
    with_input(p)
    with_output(p)
    p.add_argument("--order", type=int, default=3, help="values per pattern (default 3)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--all-patterns", action="store_true", help="include unobserved patterns")
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("turning-rate", help="turning rate of consecutive blocks")
    with_input(p)
    with_output(p)
    p.add_argument("--block-size", type=int, required=True, help="windows per block, m")
    p.set_defaults(func=cmd_turning_rate)

    p = sub.add_parser("detect", help="self-normalized CUSUM test for a turning-rate change")
    with_input(p)
    with_output(p)
    p.add_argument("--block-size", type=int, default=None, help="windows per block, m")
    p.add_argument("--block-rule", default="n^0.6", help="automatic block rule (default n^0.6)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--cache-dir", default=None,
                   help="quantile cache (default $ORDINAL_CPD_CACHE_DIR or ~/.cache/ordinal_cpd)")
    p.add_argument("--mc-reps", type=int, default=cpd.DEFAULT_REPS)
    p.add_argument("--grid", type=int, default=cpd.DEFAULT_GRID)
    p.add_argument("--seed", type=int, default=cpd.DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="simulate linear increment processes")
    with_output(p)
    p.add_argument("--model", choices=("ma1", "ar1", "farima", "ma1-break", "ar1-break"),
                   default="ma1")
    p.add_argument("--spec", default=None, help="JSON process spec instead of model flags")
    for name in ("theta", "theta1", "theta2", "phi", "phi1", "phi2", "d"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--truncation", type=int, default=10_000)
    p.add_argument("--break-frac", type=float, default=0.5)
    p.add_argument("--noise", choices=("gaussian", "t", "laplace"), default="gaussian")
    p.add_argument("--loc", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--df", type=float, default=2.0)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--columns", choices=("increments", "path", "both"), default="increments",
                   help="write increments, the integrated path, or both")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("quantiles", help="tabulate null critical values")
    p.add_argument("--config", default=None)
    p.add_argument("--kind", choices=cpd.KINDS, default="sn_cusum")
    p.add_argument("--alphas", type=float, nargs="+", default=list(cpd.DEFAULT_ALPHAS))
    p.add_argument("--grid", type=int, default=cpd.DEFAULT_GRID)
    p.add_argument("--reps", type=int, default=cpd.DEFAULT_REPS)
    p.add_argument("--seed", type=int, default=cpd.DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_quantiles)

    for name, func, text in (("power", cmd_power, "rejection-rate table (Table-1 layout)"),
                             ("experiment", cmd_experiment, "run a harness experiment")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--output-dir", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("replay", help="rerun a manifest and verify identical outputs")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def _publish(args, argv: list[str], result: Result, started: str) -> None:
    staged = StagedOutputs()
    try:
        for path, text in result.files.items():
            staged.add(path, text)
        published = staged.commit()
    except BaseException:
        staged.discard()
        raise
    if result.manifest:
        manifest = build_manifest(args.command, argv, result.config, result.seed, started,
                                  published)
        write_json_atomic(result.manifest, manifest)


def main(argv: list[str] | None = None, _replaying: bool = False) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = utc_now()
    try:
        result = args.func(args)
        if args.command != "replay":
            _publish(args, argv, result, started)
    except (OrdinalCPDError, InputFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if result.stdout and not _replaying:
        sys.stdout.write(result.stdout)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
