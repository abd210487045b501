"""Command-line front end: bounds, estimates, coverage runs, demos, lemma checks.

Every command writes a deterministic CSV (17-significant-digit floats, comma
separated, LF line endings) plus a ``<out>.meta`` sidecar recording the
configuration, seed, library version, and wall-clock time; only the sidecar
carries timing, so repeated runs with the same config and seed are
byte-identical.  Exit status is 0 on success, 2 when the requested parameters
violate a precondition (e.g. a bin count below the validity threshold), and 1
on I/O or data-format problems.  Errors print one machine-parsable line to
standard error: ``error: <kind>: <detail>``.

Configs can be stored as flat ``key = value`` files mirroring the flags
(``--config FILE``); explicit command-line flags override file values.
The worker pool for trial batches is capped by ENTROBOUND_THREADS.
"""
from __future__ import annotations

import argparse
import math
import csv as _csv
import os
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundParams, optimize_M, total_bound
from .densities import sample, tent_density, uniform_density
from .errors import EntroboundError, IngestError, OutOfSupportError, ValidityError
from .estimators import (
    ExternalEstimator,
    estimate_entropy_certified,
    estimate_mi_certified,
    kl_demo,
    mi_adversary_demo,
    prop1_demo,
)
from .histogram import _as_points
from .oracle import (
    check_density_gap,
    check_entropy_continuity,
    check_sup_bound,
    check_xlogx_gap,
    exact_discrete_entropy,
    expected_plugin_entropy_enum,
    integrate_box,
    numeric_entropy,
    quantized_companion,
)
from .rng import generator, split

__all__ = ["ExperimentConfig", "run", "main", "ingest", "emit_f64le", "emit_csv"]

_DENSITIES = {"tent": tent_density, "uniform": uniform_density}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Flat record of one CLI invocation; round-trips through ``to_text``."""

    command: str
    density: str | None = None
    input: str | None = None
    format: str = "csv"
    k: int = 1
    k1: int = 1
    k2: int = 1
    l: float | None = None
    m: int | None = None
    n: int | None = None
    delta: float | None = None
    c: float | None = None
    trials: int | None = None
    seed: int = 0
    out: str | None = None
    tol: float | None = None
    m_list: str = "8,16,32"
    pairs: int = 1000000
    estimator: str | None = None
    threads: int | None = None

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, float):
                lines.append(f"{f.name} = {value:.17g}")
            else:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls(**parse_config_text(text))


_CONFIG_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    declared = _CONFIG_TYPES.get(name)
    if declared is None:
        raise ValueError(f"unknown config key {name!r}")
    raw = raw.strip()
    if "int" in declared:
        return int(raw)
    if "float" in declared:
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        out[key.strip()] = _coerce(key.strip(), raw)
    return out


# ---------------------------------------------------------------------------
# Data ingestion and emission
# ---------------------------------------------------------------------------


def ingest(path, format: str = "csv", k: int | None = None) -> np.ndarray:
    """Load sample points from a CSV or little-endian float64 binary file.

    CSV: one point per line, comma-separated decimal fields; a header line is
    detected by a non-numeric first token.  f64le: packed little-endian
    8-byte floats, row-major, k per row (k required).  Non-finite values are
    rejected.
    """
    path = Path(path)
    if format == "csv":
        rows = []
        width = k
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if lineno == 1:
                    try:
                        float(parts[0])
                    except ValueError:
                        continue  # header line
                try:
                    values = [float(tok) for tok in parts]
                except ValueError as exc:
                    raise IngestError(f"{path}: line {lineno}: {exc}") from None
                if width is None:
                    width = len(values)
                if len(values) != width:
                    raise IngestError(
                        f"{path}: line {lineno}: expected {width} fields, got {len(values)}"
                    )
                if not all(math.isfinite(v) for v in values):
                    raise IngestError(f"{path}: line {lineno}: non-finite value")
                rows.append(values)
        if not rows:
            raise IngestError(f"{path}: no data rows")
        return np.asarray(rows, dtype=np.float64)
    if format == "f64le":
        if k is None:
            raise ValueError("f64le ingestion requires the point dimension k")
        raw = path.read_bytes()
        if len(raw) % (8 * k) != 0:
            raise IngestError(
                f"{path}: byte length {len(raw)} is not a multiple of 8*k={8 * k}"
            )
        arr = np.frombuffer(raw, dtype="<f8").reshape(-1, k)
        if not np.all(np.isfinite(arr)):
            offset = int(np.argmax(~np.isfinite(arr).all(axis=1)))
            raise IngestError(f"{path}: non-finite value at row {offset}")
        if arr.shape[0] == 0:
            raise IngestError(f"{path}: no data rows")
        return arr.copy()
    raise ValueError(f"unknown format {format!r} (expected csv or f64le)")


def emit_f64le(path, samples) -> None:
    """Write samples as packed little-endian float64 rows (ingest round-trips)."""
    Path(path).write_bytes(np.ascontiguousarray(_as_points(samples), dtype="<f8").tobytes())


def emit_csv(path, samples) -> None:
    """Write samples as CSV rows with round-trip-safe 17-digit floats."""
    pts = _as_points(samples)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in pts:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col, "")) for col in columns])


def _write_meta(out_path, config: ExperimentConfig, wall_time: float) -> None:
    meta = config.to_text() + f"version = {__version__}\nwall_time_s = {wall_time:.6f}\n"
    Path(str(out_path) + ".meta").write_text(meta, encoding="utf-8")


def _thread_count(config: ExperimentConfig) -> int:
    if config.threads is not None:
        return max(1, config.threads)
    env = os.environ.get("ENTROBOUND_THREADS")
    if env:
        return max(1, int(env))
    return min(32, os.cpu_count() or 1)


def _map_ordered(fn, count: int, threads: int) -> list:
    """Apply fn to 0..count-1 on a worker pool, collecting in index order."""
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------


def _require(config: ExperimentConfig, *names: str) -> None:
    for name in names:
        if getattr(config, name) is None:
            raise ValueError(f"{config.command}: missing required option --{name}")


def _load_density(config: ExperimentConfig, K: int):
    if config.density is None:
        raise ValueError(f"{config.command}: requires --density")
    try:
        factory = _DENSITIES[config.density]
    except KeyError:
        raise ValueError(
            f"unknown density {config.density!r} (available: {sorted(_DENSITIES)})"
        ) from None
    return factory(K)


def _entropy_samples(config: ExperimentConfig) -> np.ndarray:
    if config.input is not None:
        pts = ingest(config.input, config.format, k=config.k)
        if pts.shape[1] != config.k:
            raise ValueError(
                f"input has {pts.shape[1]} columns but --k is {config.k}"
            )
        return pts
    _require(config, "n")
    model = _load_density(config, config.k)
    return sample(model, config.n, config.seed)


def _cmd_bound(config: ExperimentConfig):
    _require(config, "l", "m", "n", "delta")
    params = BoundParams(config.k, config.l, config.m, config.n, config.delta)
    bound = total_bound(params)
    row = {
        "k": config.k,
        "l": config.l,
        "m": config.m,
        "n": config.n,
        "delta": config.delta,
        "quant_bias": bound.quant_bias,
        "stat_dev": bound.stat_dev,
        "emp_bias": bound.emp_bias,
        "total": bound.total,
    }
    cols = list(row)
    line = " ".join(f"{key}={_fmt(row[key])}" for key in ("total", "quant_bias", "stat_dev", "emp_bias"))
    return cols, [row], line


def _cmd_optimize_m(config: ExperimentConfig):
    _require(config, "l", "n", "delta")
    M, bound = optimize_M(config.k, config.l, config.n, config.delta)
    row = {
        "k": config.k,
        "l": config.l,
        "n": config.n,
        "delta": config.delta,
        "M": M,
        "quant_bias": bound.quant_bias,
        "stat_dev": bound.stat_dev,
        "emp_bias": bound.emp_bias,
        "total": bound.total,
    }
    return list(row), [row], f"M={M} total={_fmt(bound.total)}"


def _cmd_estimate(config: ExperimentConfig):
    _require(config, "l", "delta")
    pts = _entropy_samples(config)
    report = estimate_entropy_certified(
        pts, config.l, config.delta, M=config.m, seed=config.seed
    )
    row = {
        "estimate": report.estimate,
        "total_bound": report.bound.total,
        "quant_bias": report.bound.quant_bias,
        "stat_dev": report.bound.stat_dev,
        "emp_bias": report.bound.emp_bias,
        "M": report.params.M,
        "N": report.params.N,
    }
    line = f"estimate={_fmt(report.estimate)} total_bound={_fmt(report.bound.total)} M={report.params.M}"
    return list(row), [row], line


def _cmd_mi_estimate(config: ExperimentConfig):
    _require(config, "l", "delta")
    k1, k2 = config.k1, config.k2
    if config.input is not None:
        pts = ingest(config.input, config.format, k=k1 + k2)
        xs, ys = pts[:, :k1], pts[:, k1:]
    else:
        _require(config, "n")
        xs = sample(_load_density(config, k1), config.n, split(config.seed, 0))
        ys = sample(_load_density(config, k2), config.n, split(config.seed, 1))
    report = estimate_mi_certified(xs, ys, config.l, config.delta, seed=config.seed)
    m_x, m_y, m_xy = (part.params.M for part in report.components)
    row = {
        "estimate": report.estimate,
        "total_bound": report.bound.total,
        "quant_bias": report.bound.quant_bias,
        "stat_dev": report.bound.stat_dev,
        "emp_bias": report.bound.emp_bias,
        "m_x": m_x,
        "m_y": m_y,
        "m_xy": m_xy,
        "N": report.params.N,
    }
    line = f"estimate={_fmt(report.estimate)} total_bound={_fmt(report.bound.total)}"
    return list(row), [row], line


def _cmd_coverage(config: ExperimentConfig):
    _require(config, "l", "n", "delta", "trials")
    model = _load_density(config, config.k)
    if model.analytic_entropy is None:
        raise ValueError("coverage requires a density with known entropy")
    truth = model.analytic_entropy
    if config.m is not None:
        M = config.m
        bound = total_bound(BoundParams(config.k, config.l, M, config.n, config.delta))
    else:
        M, bound = optimize_M(config.k, config.l, config.n, config.delta)

    def one_trial(t: int) -> dict:
        seed_t = split(config.seed, t)
        pts = sample(model, config.n, seed_t)
        report = estimate_entropy_certified(pts, config.l, config.delta, M=M, seed=seed_t)
        abs_err = abs(report.estimate - truth)
        return {
            "row": "trial",
            "trial": t,
            "seed": seed_t,
            "estimate": report.estimate,
            "truth": truth,
            "abs_err": abs_err,
            "bound_total": report.bound.total,
            "covered": int(abs_err <= report.bound.total),
        }

    rows = _map_ordered(one_trial, config.trials, _thread_count(config))
    coverage = sum(r["covered"] for r in rows) / config.trials
    rows.append({"row": "summary", "coverage": coverage})
    cols = [
        "row",
        "trial",
        "seed",
        "estimate",
        "truth",
        "abs_err",
        "bound_total",
        "covered",
        "coverage",
    ]
    line = f"coverage={_fmt(coverage)} trials={config.trials} M={M} bound_total={_fmt(bound.total)}"
    return cols, rows, line


def _external_estimator(config: ExperimentConfig):
    if config.estimator is None:
        return None
    return ExternalEstimator(shlex.split(config.estimator))


def _cmd_demo(config: ExperimentConfig):
    _require(config, "c", "delta", "n", "trials")
    demo_fn = {
        "prop1-demo": prop1_demo,
        "mi-demo": mi_adversary_demo,
        "kl-demo": kl_demo,
    }[config.command]
    report = demo_fn(
        config.c,
        config.delta,
        config.n,
        config.trials,
        config.seed,
        estimator=_external_estimator(config),
    )
    row = {
        "trials": report.trials,
        "failure_fraction": report.failure_fraction,
        "below_threshold_fraction": report.below_threshold_fraction,
        "calibrated_b": report.calibrated_b,
        "true_value": report.true_value,
        "C": report.C,
        "delta": report.delta,
        "N": config.n,
        "seed": config.seed,
    }
    line = (
        f"failure_fraction={_fmt(report.failure_fraction)} "
        f"calibrated_b={_fmt(report.calibrated_b)} true_value={_fmt(report.true_value)}"
    )
    return list(row), [row], line


def _cmd_verify_lemmas(config: ExperimentConfig):
    K = config.k
    tent = tent_density(K)
    L = tent.lipschitz_L
    # Quadrature of the K=2 entropy integrand converges too slowly for 1e-6
    # within the per-level point budget; one decade looser costs nothing
    # against bound margins that are two orders of magnitude wide.
    tol = config.tol if config.tol is not None else (1e-6 if K == 1 else 1e-5)
    m_values = [int(tok) for tok in config.m_list.split(",") if tok.strip()]
    rows = []

    def add(check: str, m, lhs: float, rhs: float, holds: bool) -> None:
        rows.append(
            {"check": check, "k": K, "m": "" if m is None else m,
             "lhs": lhs, "rhs": rhs, "holds": bool(holds)}
        )

    sup = check_sup_bound(tent)
    add("sup_bound", None, sup.sup_p, sup.bound, sup.sup_p <= sup.bound * (1 + 1e-9))

    for M in m_values:
        gap = check_density_gap(tent, M)
        gap_bound = L * K / (2.0 * M)
        add("density_gap", M, gap, gap_bound, gap <= gap_bound * (1 + 1e-9))

        companion = quantized_companion(tent, M)
        cont = check_entropy_continuity(tent, companion, gap_bound, sup.bound, tol)
        add("entropy_continuity", M, cont.lhs, cont.rhs, cont.lhs <= cont.rhs + 2 * tol)

        centers = _grid_centers(M, K)
        pmf = companion.pdf(centers) / float(M**K)
        ident_lhs = exact_discrete_entropy(pmf)
        ident_rhs = numeric_entropy(companion, tol).value + K * math.log(M)
        add("quantized_identity", M, ident_lhs, ident_rhs, abs(ident_lhs - ident_rhs) <= 4 * tol)

    rng = generator(split(config.seed, 99))
    x = rng.random(config.pairs)
    shift = (rng.random(config.pairs) * 2.0 - 1.0) * 0.1207
    y = np.maximum(x + shift, 0.0)
    lhs, rhs = check_xlogx_gap(x, y)
    worst = int(np.argmax(lhs - rhs))
    add("xlogx_gap", None, float(lhs[worst]), float(rhs[worst]),
        bool(np.all(lhs <= rhs + 1e-12)))

    # Lipschitz-difference integral over the first grid cell: with f vanishing
    # at the cell midpoint, integral |f| <= eps^(K+1) * L * K / 2.
    M0 = m_values[0] if m_values else 8
    eps = 1.0 / M0
    cell = np.array([[0.0, eps]] * K)
    mid = np.full((1, K), eps / 2.0)
    p_mid = float(tent.pdf(mid)[0])
    f_int = integrate_box(lambda pts: np.abs(tent.pdf(pts) - p_mid), cell, tol).value
    f_bound = eps ** (K + 1) * L * K / 2.0
    add("f_difference_bound", M0, f_int, f_bound, f_int <= f_bound * (1 + 1e-9))

    pmf = np.array([0.5, 0.3, 0.2])
    expected = expected_plugin_entropy_enum(pmf, 5)
    bias = abs(exact_discrete_entropy(pmf) - expected)
    bias_bound = math.log(1.0 + 2.0 / 5.0)
    add("discrete_entropy_bias", None, bias, bias_bound, bias <= bias_bound)

    cols = ["check", "k", "m", "lhs", "rhs", "holds"]
    n_failed = sum(1 for r in rows if not r["holds"])
    return cols, rows, f"checks={len(rows)} failed={n_failed}"


def _grid_centers(M: int, K: int) -> np.ndarray:
    centers = (np.arange(M) + 0.5) / M
    mesh = np.meshgrid(*([centers] * K), indexing="ij")
    return np.column_stack([ax.ravel() for ax in mesh])


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

_HANDLERS = {
    "bound": _cmd_bound,
    "optimize-m": _cmd_optimize_m,
    "estimate": _cmd_estimate,
    "mi-estimate": _cmd_mi_estimate,
    "coverage": _cmd_coverage,
    "prop1-demo": _cmd_demo,
    "mi-demo": _cmd_demo,
    "kl-demo": _cmd_demo,
    "verify-lemmas": _cmd_verify_lemmas,
}


def _validate_config(config: ExperimentConfig) -> None:
    """Reject parameter values the modules would reject, before any work."""
    if config.command not in _HANDLERS:
        raise ValueError(f"unknown command {config.command!r}")
    if config.delta is not None and not (0.0 < config.delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {config.delta!r}")
    if config.l is not None and not (config.l > 0.0):
        raise ValueError(f"l must be positive, got {config.l!r}")
    if config.c is not None and not (config.c > 0.0):
        raise ValueError(f"c must be positive, got {config.c!r}")
    for name in ("k", "k1", "k2"):
        if getattr(config, name) < 1:
            raise ValueError(f"{name} must be >= 1, got {getattr(config, name)!r}")
    for name in ("m", "n", "trials"):
        value = getattr(config, name)
        if value is not None and value < 1:
            raise ValueError(f"{name} must be >= 1, got {value!r}")
    if config.format not in ("csv", "f64le"):
        raise ValueError(f"format must be csv or f64le, got {config.format!r}")


def run(config: ExperimentConfig) -> int:
    """Execute one configured command; returns the process exit status."""
    started = time.monotonic()
    _validate_config(config)
    handler = _HANDLERS[config.command]
    columns, rows, line = handler(config)
    if config.out:
        _write_csv(config.out, columns, rows)
        _write_meta(config.out, config, time.monotonic() - started)
    if line:
        print(line)
    return 0


def _add_common(sub, *options: str) -> None:
    sub.add_argument("--config", type=str, default=None, help="key = value config file")
    specs = {
        "density": (str, "built-in density name (tent, uniform)"),
        "input": (str, "sample file to ingest instead of sampling a density"),
        "format": (str, "input format: csv or f64le"),
        "k": (int, "dimension"),
        "k1": (int, "dimension of x"),
        "k2": (int, "dimension of y"),
        "l": (float, "Lipschitz constant (l1 norm)"),
        "m": (int, "bins per axis"),
        "n": (int, "sample count"),
        "delta": (float, "failure probability"),
        "c": (float, "target accuracy for demos"),
        "trials": (int, "number of seeded trials"),
        "seed": (int, "master seed"),
        "out": (str, "output CSV path"),
        "tol": (float, "quadrature tolerance"),
        "m_list": (str, "comma-separated bin counts"),
        "pairs": (int, "random pairs for the x log x check"),
        "estimator": (str, "external estimator command"),
        "threads": (int, "worker pool size"),
    }
    for opt in options:
        typ, helptext = specs[opt]
        sub.add_argument(f"--{opt.replace('_', '-')}", dest=opt, type=typ, help=helptext)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entrobound",
        description="Histogram differential-entropy estimation with explicit confidence bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("bound", help="evaluate the confidence bound"),
                "k", "l", "m", "n", "delta", "out", "seed", "threads")
    _add_common(sub.add_parser("optimize-m", help="bound-minimizing bin count"),
                "k", "l", "n", "delta", "out", "seed", "threads")
    _add_common(sub.add_parser("estimate", help="certified entropy estimate"),
                "density", "input", "format", "k", "l", "m", "n", "delta", "seed", "out", "threads")
    _add_common(sub.add_parser("mi-estimate", help="certified mutual-information estimate"),
                "density", "input", "format", "k1", "k2", "l", "n", "delta", "seed", "out", "threads")
    _add_common(sub.add_parser("coverage", help="empirical coverage experiment"),
                "density", "k", "l", "m", "n", "delta", "trials", "seed", "out", "threads")
    for name in ("prop1-demo", "mi-demo", "kl-demo"):
        _add_common(sub.add_parser(name, help=f"adversarial demonstration: {name}"),
                    "c", "delta", "n", "trials", "seed", "estimator", "out", "threads")
    _add_common(sub.add_parser("verify-lemmas", help="numerical checks of the supporting inequalities"),
                "k", "m_list", "tol", "pairs", "seed", "out", "threads")
    return parser


def _merge_config_file(argv: list[str]) -> list[str]:
    """Expand --config FILE into flags placed before the explicit ones."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    path = argv[idx + 1]
    data = parse_config_text(Path(path).read_text(encoding="utf-8"))
    rest = argv[:idx] + argv[idx + 2 :]
    command = rest[0] if rest else data.get("command")
    if command is None:
        raise ValueError("no command given on the command line or in the config file")
    if "command" in data and rest and data["command"] != rest[0]:
        raise ValueError(
            f"config file is for command {data['command']!r}, not {rest[0]!r}"
        )
    flags: list[str] = []
    for key, value in data.items():
        if key == "command":
            continue
        flags.append(f"--{key.replace('_', '-')}")
        flags.append(str(value))
    return [command] + flags + rest[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _merge_config_file(argv)
        args = build_parser().parse_args(argv)
        provided = {
            key: value for key, value in vars(args).items()
            if key in _CONFIG_TYPES and value is not None
        }
        config = ExperimentConfig(**provided)
        return run(config)
    except ValidityError as exc:
        print(f"error: validity: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OutOfSupportError) as exc:
        print(f"error: invalid: {exc}", file=sys.stderr)
        return 2
    except (IngestError, OSError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    except EntroboundError as exc:
        print(f"error: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
