"""File formats: numeric series input, staged output files and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np

from .cpd import NullQuantileTable, null_quantiles
from .exceptions import ConfigurationError, OrdinalCPDError

CACHE_ENV = "ORDINAL_CPD_CACHE_DIR"
CACHE_SCHEMA = 1


class InputFormatError(OrdinalCPDError, ValueError):
    """Raised for unreadable or non-numeric input files."""


def read_series(path: str | os.PathLike, column: str | int | None = None) -> np.ndarray:
    """Read one numeric column from a text/CSV file.

    The first line may be a header.  With several columns, ``column`` picks
    one by header name or 0-based position; blank lines are ignored.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc.strerror}") from exc
    values: list[float] = []
    index: int | None = column if isinstance(column, int) else None
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        if lineno == 1 and not all(_is_number(c) for c in cells):
            if isinstance(column, str):
                if column not in cells:
                    raise InputFormatError(f"{path}: no column named {column!r}")
                index = cells.index(column)
            continue
        if index is None:
            if isinstance(column, str):
                raise InputFormatError(f"{path}: no header row to find column {column!r} in")
            if len(cells) != 1:
                raise InputFormatError(
                    f"{path}:{lineno}: expected a single column, found {len(cells)}; "
                    "choose one with --column"
                )
            index = 0
        if index >= len(cells):
            raise InputFormatError(f"{path}:{lineno}: missing column {index}")
        token = cells[index]
        try:
            value = float(token)
        except ValueError:
            raise InputFormatError(f"{path}:{lineno}: not a number: {token!r}") from None
        if not math.isfinite(value):
            raise InputFormatError(f"{path}:{lineno}: non-finite value {token!r}")
        values.append(value)
    return np.asarray(values, dtype=np.float64)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def format_float(value: float) -> str:
    return repr(float(value))


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def library_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class StagedOutputs:
    """Collects output files in temporaries and publishes them together.

    Nothing appears at the final paths unless :meth:`commit` runs, so a
    failing command leaves no partial output behind.
    """

    def __init__(self):
        self._staged: list[tuple[str, Path]] = []

    def add(self, path: str | os.PathLike, text: str) -> None:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        self._staged.append((tmp, target))

    @property
    def paths(self) -> list[Path]:
        return [target for _, target in self._staged]

    def commit(self) -> list[Path]:
        for tmp, target in self._staged:
            os.replace(tmp, target)
        published = self.paths
        self._staged = []
        return published

    def discard(self) -> None:
        for tmp, _ in self._staged:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
        self._staged = []


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def build_manifest(command: str, argv: list[str], config: dict[str, Any],
                   master_seed: int | None, started: str,
                   outputs: list[Path]) -> dict[str, Any]:
    return {
        "command": command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config": config,
        "master_seed": master_seed,
        "started": started,
        "finished": utc_now(),
        "outputs": [{"path": str(p), "sha256": sha256_file(p)} for p in outputs],
        "library_version": library_version(),
    }


def write_json_atomic(path: str | os.PathLike, data: Any) -> None:
    staged = StagedOutputs()
    staged.add(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
    staged.commit()


# -- quantile cache -----------------------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "ordinal_cpd"


def cache_key(kind: str, grid: int, reps: int, seed: int) -> str:
    ident = json.dumps({"kind": kind, "grid": grid, "reps": reps, "seed": seed,
                        "schema": CACHE_SCHEMA}, sort_keys=True)
    return hashlib.sha256(ident.encode()).hexdigest()[:20]


def cached_quantiles(kind: str, grid: int, reps: int, seed: int, alphas,
                     cache_dir: str | os.PathLike | None = None,
                     threads: int = 1) -> NullQuantileTable:
    """Load a quantile table from the cache, simulating and storing it if absent."""
    directory = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = directory / f"{kind}-{cache_key(kind, grid, reps, seed)}.json"
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"quantile cache {path} is not valid JSON") from exc
        if data.get("schema") != CACHE_SCHEMA:
            raise ConfigurationError(f"quantile cache {path} has an unsupported schema")
        table = NullQuantileTable.from_dict(data)
        if (table.statistic_kind, table.grid_size, table.replications, table.seed) != (
                kind, grid, reps, seed):
            raise ConfigurationError(f"quantile cache {path} does not match its key")
        return table
    table = null_quantiles(kind, alphas, grid, reps, seed, threads)
    data = table.to_dict()
    data["schema"] = CACHE_SCHEMA
    directory.mkdir(parents=True, exist_ok=True)
    write_json_atomic(path, data)
    return table
