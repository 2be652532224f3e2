"""Experiment grid: every (dims, lambda, sigma_min) cell, repeated trials,
every algorithm on the same instance, traces streamed as CSV.

Seeds
-----
All seeds are derived from ``base_seed`` with a keyed BLAKE2b digest so that
any cell or trial can be rerun on its own::

    instance seed  = base_seed XOR H("instance", m, n, lambda, sigma_min, trial)
    solver seed    = base_seed XOR H("solver", m, n, lambda, sigma_min, trial, label)

where H takes the first 8 bytes (little endian) of BLAKE2b over the
``|``-joined fields, floats written with ``repr``. ``label`` is the
algorithm name, with ``/<init>`` appended for the IZ variants.
"""

from __future__ import annotations

import hashlib
import io
import math
import statistics
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import problems, solvers
from .solvers import IZInit, SolverKind, TraceRecord

CSV_COLUMNS = (
    "algorithm", "iz_init", "m", "n", "lambda", "sigma_min", "trial",
    "iteration", "err_beta", "err_normal", "err_weighted", "noop_count", "wall_ns",
)
CSV_HEADER = ",".join(CSV_COLUMNS)
PARTIAL_MARKER = "#PARTIAL OUTPUT"

DEFAULT_DIMS = ((1000, 1000), (10000, 100), (100, 10000))
DEFAULT_LAMBDAS = (1e-3, 1e-2, 1e-1)
DEFAULT_SIGMA_MINS = (1.0, 1e-1, 1e-2, 1e-3)
DEFAULT_ALGORITHMS = (
    (SolverKind.RGSRidge, None),
    (SolverKind.RKRidge, None),
    (SolverKind.IZ, IZInit.IZ0),
    (SolverKind.IZ, IZInit.IZ1),
    (SolverKind.IZ, IZInit.IZMIX),
    (SolverKind.IZ, IZInit.IZRND),
)


class ConfigError(ValueError):
    pass


def parse_algorithm(name: str):
    """'rk-ridge' -> (RKRidge, None); 'iz0' or 'iz:iz0' -> (IZ, IZ0)."""
    name = name.strip().lower()
    if name.startswith("iz:"):
        name = name[3:]
    if name in {i.value for i in IZInit}:
        return SolverKind.IZ, IZInit(name)
    if name == SolverKind.IZ.value:
        raise ValueError("iz needs an initialization: iz0, iz1, izmix or izrnd")
    try:
        return SolverKind(name), None
    except ValueError:
        raise ValueError(
            f"unknown algorithm {name!r}; valid: {', '.join(solvers.ALGORITHM_NAMES)}, "
            "iz0, iz1, izmix, izrnd"
        ) from None


def algorithm_label(kind, iz_init) -> str:
    return kind.value if iz_init is None else f"{kind.value}/{iz_init.value}"


@dataclass
class ExperimentConfig:
    dims: list = field(default_factory=lambda: list(DEFAULT_DIMS))
    lambdas: list = field(default_factory=lambda: list(DEFAULT_LAMBDAS))
    sigma_mins: list = field(default_factory=lambda: list(DEFAULT_SIGMA_MINS))
    algorithms: list = field(default_factory=lambda: list(DEFAULT_ALGORITHMS))
    iterations: int = 10**4
    trace_every: int = 100
    trials: int = 20
    base_seed: int = 0
    metrics: list = field(default_factory=lambda: list(solvers.METRICS))
    record_wall: bool = False

    def __post_init__(self):
        for name in ("dims", "lambdas", "sigma_mins", "algorithms", "metrics"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        for m, n in self.dims:
            if m < 1 or n < 1:
                raise ConfigError(f"bad dimensions {m}x{n}")
        if any(not lam > 0 for lam in self.lambdas):
            raise ConfigError("lambdas must be positive")
        if any(not 0 < s <= 1 for s in self.sigma_mins):
            raise ConfigError("sigma_mins must be in (0,1]")
        if self.trace_every < 1 or self.iterations < self.trace_every:
            raise ConfigError("need iterations >= trace_every >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        unknown = set(self.metrics) - set(solvers.METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}")
        self.algorithms = [
            (SolverKind(k), None if i is None else IZInit(i)) for k, i in self.algorithms
        ]

    def cells(self):
        for m, n in self.dims:
            for lam in self.lambdas:
                for s in self.sigma_mins:
                    yield (int(m), int(n), float(lam), float(s))


def _split(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; '#' starts a comment; lists are comma separated.

    Keys: dims (e.g. ``1000x1000,10000x100``), lambdas, sigma_mins,
    algorithms (rk, rgs, rk-ridge, rgs-ridge, naive-rk, naive-rgs, iz0, iz1,
    izmix, izrnd), iterations, trace_every, trials, base_seed, metrics.
    Missing keys keep their defaults.
    """
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value: {raw.strip()!r}")
        try:
            if key == "dims":
                dims = []
                for item in _split(value):
                    m, x, n = item.lower().partition("x")
                    if not x:
                        raise ValueError(f"bad dims entry {item!r}")
                    dims.append((int(m), int(n)))
                kwargs["dims"] = dims
            elif key in ("lambdas", "sigma_mins"):
                kwargs[key] = [float(v) for v in _split(value)]
            elif key == "algorithms":
                kwargs[key] = [parse_algorithm(v) for v in _split(value)]
            elif key in ("iterations", "trace_every", "trials", "base_seed"):
                kwargs[key] = int(value)
            elif key == "metrics":
                kwargs[key] = _split(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}: {raw.strip()!r}") from None
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def _hash64(*fields) -> int:
    text = "|".join(repr(f) if isinstance(f, float) else str(f) for f in fields)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def instance_seed(base_seed, cell, trial) -> int:
    return (int(base_seed) ^ _hash64("instance", *cell, trial)) & 0xFFFFFFFFFFFFFFFF


def solver_seed(base_seed, cell, trial, label) -> int:
    return (int(base_seed) ^ _hash64("solver", *cell, trial, label)) & 0xFFFFFFFFFFFFFFFF


def records_per_run(config) -> int:
    return config.iterations // config.trace_every + 1


def expected_record_count(config) -> int:
    n_cells = len(config.dims) * len(config.lambdas) * len(config.sigma_mins)
    return n_cells * config.trials * len(config.algorithms) * records_per_run(config)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}" if math.isfinite(v) else ("" if math.isnan(v) else repr(v))
    return str(v)


def format_record(rec: TraceRecord) -> str:
    return ",".join(_fmt(v) for v in (
        rec.algorithm, rec.iz_init, rec.m, rec.n, rec.lam, rec.sigma_min, rec.trial,
        rec.iteration, rec.err_beta, rec.err_normal, rec.err_weighted, rec.noop_count,
        rec.wall_ns,
    ))


def parse_record(line: str) -> TraceRecord:
    f = line.rstrip("\n").split(",")
    if len(f) != len(CSV_COLUMNS):
        raise ValueError(f"expected {len(CSV_COLUMNS)} fields, got {len(f)}")

    def num(s):
        return float(s) if s else float("nan")

    return TraceRecord(f[0], f[1], int(f[2]), int(f[3]), float(f[4]), num(f[5]),
                       int(f[6]), int(f[7]), num(f[8]), num(f[9]), num(f[10]),
                       int(f[11]), int(f[12]))


def read_csv(path_or_file):
    fh = open(path_or_file, encoding="utf-8") if isinstance(path_or_file, str) else path_or_file
    try:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        out = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            if line.startswith(PARTIAL_MARKER):
                raise ValueError(f"line {lineno}: trace file is incomplete")
            try:
                out.append(parse_record(line))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        return out
    finally:
        if fh is not path_or_file:
            fh.close()


def run_algorithm(problem, kind, iz_init, seed, iterations, trace_every,
                  metrics=solvers.METRICS, trial=0, wall_clock=False):
    state = solvers.init(kind, problem, iz_init, seed=seed)
    sigma_min = problem.sigma_min if problem.sigma_min is not None else float("nan")
    return solvers.run(state, problem.X, problem.y, problem.lam, iterations, trace_every,
                       problem.oracle, metrics, sigma_min=sigma_min, trial=trial,
                       wall_clock=wall_clock)


def run_trial(config: ExperimentConfig, cell, trial):
    """All algorithms on one generated instance; returns their TraceRecords."""
    m, n, lam, sigma_min = cell
    problem = problems.generate(m, n, sigma_min, lam, instance_seed(config.base_seed, cell, trial))
    records = []
    for kind, iz_init in config.algorithms:
        label = algorithm_label(kind, iz_init)
        records.extend(run_algorithm(
            problem, kind, iz_init, solver_seed(config.base_seed, cell, trial, label),
            config.iterations, config.trace_every, config.metrics, trial,
            config.record_wall,
        ))
    return records


def _trial_rows(args):
    config, cell, trial = args
    return [format_record(r) for r in run_trial(config, cell, trial)]


@dataclass
class GridSummary:
    cells: int
    trials: int
    records: int
    wall_seconds: float


def run_grid(config: ExperimentConfig, out, jobs: int = 1) -> GridSummary:
    """Run every cell and trial, writing CSV rows to the text stream ``out``.

    Rows are written in (cell, trial, algorithm, iteration) order whatever
    ``jobs`` is. If anything fails midway a ``#PARTIAL OUTPUT`` row is
    appended before the error propagates.
    """
    t0 = time.perf_counter()
    tasks = [(config, cell, t) for cell in config.cells() for t in range(config.trials)]
    written = 0
    try:
        out.write(CSV_HEADER + "\n")
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rows in pool.map(_trial_rows, tasks):
                    out.write("".join(r + "\n" for r in rows))
                    written += len(rows)
        else:
            for task in tasks:
                rows = _trial_rows(task)
                out.write("".join(r + "\n" for r in rows))
                written += len(rows)
        out.flush()
    except BaseException as exc:
        try:
            out.write(f"{PARTIAL_MARKER}: {type(exc).__name__}: {exc}\n")
            out.flush()
        except Exception:
            pass
        raise
    expected = expected_record_count(config)
    if written != expected:
        raise RuntimeError(f"wrote {written} records, expected {expected}")
    n_cells = len(tasks) // config.trials
    return GridSummary(n_cells, config.trials, written, time.perf_counter() - t0)


def run_grid_to_string(config, jobs=1):
    buf = io.StringIO()
    summary = run_grid(config, buf, jobs)
    return buf.getvalue(), summary


GROUP_FIELDS = ("algorithm", "iz_init", "m", "n", "lam", "sigma_min")
AGG_METRICS = ("err_beta", "err_normal", "err_weighted", "noop_count")


def aggregate(records, how="mean"):
    """Average each metric over trials.

    Returns ``{group: {"iteration": array, metric: array, ...}}`` with
    group = (algorithm, iz_init, m, n, lambda, sigma_min). Every trial of a
    group must share the same iteration grid.
    """
    if how not in ("mean", "median"):
        raise ValueError("how must be 'mean' or 'median'")
    reduce = statistics.fmean if how == "mean" else statistics.median
    by_trial = defaultdict(lambda: defaultdict(list))
    for r in records:
        key = tuple(getattr(r, f) for f in GROUP_FIELDS)
        by_trial[key][r.trial].append(r)
    result = {}
    for key, trials in by_trial.items():
        grids = {t: [r.iteration for r in rs] for t, rs in trials.items()}
        first = next(iter(grids.values()))
        if any(g != first for g in grids.values()):
            raise ValueError(f"ragged iteration grids in group {key}")
        curves = {"iteration": np.array(first)}
        ordered = [trials[t] for t in sorted(trials)]
        for metric in AGG_METRICS:
            cols = [[getattr(r, metric) for r in rs] for rs in ordered]
            curves[metric] = np.array([reduce(vals) for vals in zip(*cols)], dtype=float)
        curves["trials"] = len(ordered)
        result[key] = curves
    return result
