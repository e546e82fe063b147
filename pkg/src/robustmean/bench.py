"""Monte Carlo benchmark harness with common random numbers.

For every (process, sample size) cell the harness replays R replications;
replication r draws one dataset with seed ``base_seed + r`` and every
estimator is evaluated on that same dataset, so estimator columns are
directly comparable.  Cells are independent tasks: a worker pool only
changes scheduling, never values.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dgp as dgp_mod
from .estimators import (
    ESTIMATOR_NAMES,
    RESERVED_ESTIMATORS,
    EstimationError,
    UnimplementedEstimatorError,
    make_estimator,
)

__all__ = [
    "ExperimentConfig",
    "MetricsRow",
    "quantile_linear",
    "run_experiment",
    "emit_csv",
    "read_csv_rows",
    "parse_config",
    "default_config",
    "CSV_HEADER",
]

CSV_HEADER = ["dgp", "n", "estimator", "mae", "mse", "median_abs", "q90_abs", "q95_abs", "failures"]

DEFAULT_NS = (200, 500, 1000, 2000, 5000)
DEFAULT_ESTIMATORS = ("l2", "cauchy", "gm", "adapt", "gnc_adapt", "gnc_tls", "are")
DEFAULT_DGPS = (
    "gaussian",
    "lognormal",
    "student_t",
    "pareto",
    "contam_random",
    "contam_adversarial",
)


@dataclass(frozen=True)
class ExperimentConfig:
    dgps: tuple = tuple(dgp_mod.make_dgp(k) for k in DEFAULT_DGPS)
    dgp_names: tuple = DEFAULT_DGPS
    ns: tuple = DEFAULT_NS
    replications: int = 100
    base_seed: int = 12345
    estimators: tuple = DEFAULT_ESTIMATORS
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.ns:
            raise ValueError("ns must be nonempty")
        if len(self.dgps) != len(self.dgp_names):
            raise ValueError("dgps and dgp_names must align")


@dataclass(frozen=True)
class MetricsRow:
    dgp: str
    n: int
    estimator: str
    mae: float
    mse: float
    median_abs: float
    q90_abs: float
    q95_abs: float
    failures: int


def quantile_linear(sorted_abs_errors, q: float) -> float:
    """Quantile by linear interpolation on sorted values:
    position h = q (R-1), value v[floor h] + frac (v[ceil h] - v[floor h])."""
    v = np.asarray(sorted_abs_errors, dtype=float)
    if v.size == 0:
        raise ValueError("quantile of empty input")
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"q must be in [0, 1], got {q}")
    h = q * (v.size - 1)
    lo = math.floor(h)
    hi = math.ceil(h)
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def _split_estimators(names) -> tuple[list[str], list[str]]:
    """Partition requested estimator names into (implemented, skipped)."""
    implemented, skipped = [], []
    for name in names:
        try:
            make_estimator(name)
        except UnimplementedEstimatorError:
            skipped.append(name)
        else:
            implemented.append(name)
    return implemented, skipped


def _run_cell(args):
    """One (dgp, n, r) replication: draw once, evaluate every estimator."""
    di, spec, n, r, base_seed, names = args
    data = dgp_mod.sample(spec, n, base_seed + r)
    out = []
    for name in names:
        try:
            out.append(float(make_estimator(name).estimate(data)))
        except EstimationError:
            out.append(float("nan"))
    return (di, n, r), out


def run_experiment(config: ExperimentConfig) -> tuple[list[MetricsRow], list[str]]:
    """Run the Monte Carlo sweep; returns (rows, skipped estimator names).

    Rows are ordered (dgp, n, estimator) following the config.  Estimator
    failures on a replication are excluded from metrics and counted in the
    row's ``failures`` field; reserved-but-undefined estimator names are
    skipped entirely and reported back.
    """
    names, skipped = _split_estimators(config.estimators)
    tasks = [
        (di, spec, n, r, config.base_seed, names)
        for di, spec in enumerate(config.dgps)
        for n in config.ns
        for r in range(config.replications)
    ]
    results: dict[tuple, list] = {}
    if config.workers and config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for key, vals in pool.map(_run_cell, tasks, chunksize=4):
                results[key] = vals
    else:
        for task in tasks:
            key, vals = _run_cell(task)
            results[key] = vals

    rows: list[MetricsRow] = []
    for di, spec in enumerate(config.dgps):
        mu = spec.mu_star
        for n in config.ns:
            per_est = np.array(
                [results[(di, n, r)] for r in range(config.replications)], dtype=float
            )  # shape (R, len(names))
            for j, name in enumerate(names):
                errs = per_est[:, j] - mu
                valid = errs[~np.isnan(errs)]
                failures = int(np.isnan(errs).sum())
                if valid.size == 0:
                    rows.append(MetricsRow(config.dgp_names[di], n, name,
                                           float("nan"), float("nan"), float("nan"),
                                           float("nan"), float("nan"), failures))
                    continue
                abs_sorted = np.sort(np.abs(valid))
                rows.append(MetricsRow(
                    dgp=config.dgp_names[di], n=n, estimator=name,
                    mae=float(np.mean(abs_sorted)),
                    mse=float(np.mean(np.square(valid))),
                    median_abs=quantile_linear(abs_sorted, 0.5),
                    q90_abs=quantile_linear(abs_sorted, 0.9),
                    q95_abs=quantile_linear(abs_sorted, 0.95),
                    failures=failures,
                ))
    return rows, skipped


def _fmt(x: float) -> str:
    return format(x, ".17g")


def emit_csv(rows, path) -> None:
    """Write metric rows with 17-significant-digit floats (lossless round trip)."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in rows:
                w.writerow([r.dgp, r.n, r.estimator, _fmt(r.mae), _fmt(r.mse),
                            _fmt(r.median_abs), _fmt(r.q90_abs), _fmt(r.q95_abs), r.failures])
    except OSError as exc:
        raise OSError(f"cannot write benchmark CSV to {path}: {exc}") from exc


def read_csv_rows(path) -> list[MetricsRow]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != CSV_HEADER:
                raise ValueError(f"unexpected CSV header in {path}: {header}")
            out = []
            for rec in reader:
                out.append(MetricsRow(rec[0], int(rec[1]), rec[2], float(rec[3]),
                                      float(rec[4]), float(rec[5]), float(rec[6]),
                                      float(rec[7]), int(rec[8])))
            return out
    except OSError as exc:
        raise OSError(f"cannot read benchmark CSV from {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Plain-text config files: one `key = value` per line, `#` comments.
# dgp tokens are kind names with optional call-style parameters, e.g.
#   dgps = gaussian, contam_random(kappa=0.05, M=100)
# ---------------------------------------------------------------------------


def _parse_dgp_token(token: str):
    token = token.strip()
    if "(" in token:
        if not token.endswith(")"):
            raise ValueError(f"malformed process token {token!r}")
        kind, arg_text = token[:-1].split("(", 1)
        params = {}
        for part in filter(None, (p.strip() for p in arg_text.split(","))):
            if "=" not in part:
                raise ValueError(f"malformed parameter {part!r} in {token!r}")
            key, val = (s.strip() for s in part.split("=", 1))
            params[key] = int(val) if key in ("k", "budget") else float(val)
        return kind.strip(), dgp_mod.make_dgp(kind.strip(), **params)
    return token, dgp_mod.make_dgp(token)


def parse_config(text: str) -> ExperimentConfig:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        fields[key] = val

    kwargs = {}
    if "ns" in fields:
        kwargs["ns"] = tuple(int(s) for s in fields.pop("ns").split(","))
    if "replications" in fields:
        kwargs["replications"] = int(fields.pop("replications"))
    if "base_seed" in fields:
        kwargs["base_seed"] = int(fields.pop("base_seed"))
    if "workers" in fields:
        kwargs["workers"] = int(fields.pop("workers"))
    if "estimators" in fields:
        kwargs["estimators"] = tuple(s.strip() for s in fields.pop("estimators").split(","))
    if "dgps" in fields:
        # split on commas not inside parentheses
        text_d = fields.pop("dgps")
        tokens, depth, cur = [], 0, []
        for ch in text_d:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            if ch == "," and depth == 0:
                tokens.append("".join(cur))
                cur = []
            else:
                cur.append(ch)
        if cur:
            tokens.append("".join(cur))
        parsed = [_parse_dgp_token(t) for t in tokens if t.strip()]
        kwargs["dgp_names"] = tuple(name for name, _ in parsed)
        kwargs["dgps"] = tuple(spec for _, spec in parsed)
    if fields:
        raise ValueError(f"unknown config keys: {sorted(fields)}")
    return ExperimentConfig(**kwargs)


def default_config() -> ExperimentConfig:
    """The full benchmark grid with the reserved loss variants omitted."""
    return ExperimentConfig()
