"""Randomized row/column solvers for ridge regression.

Seven algorithms share one state object and one step signature
``step(state, X, y, lam, index=None)``; passing ``index`` forces the row or
column instead of sampling it, which the deterministic checks rely on.

RK-ridge works on the dual variable alpha and keeps ``mirror = X^T alpha``
so that a step costs O(n); RGS-ridge (and plain RGS) keep the residual
``mirror = y - X beta`` so that a step costs O(m).
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import densela

# Rounding in an O(m) dot product plus drift over 1e4 steps reaches ~1e-13.
NOOP_RTOL = 1e-12
DEFAULT_REFRESH_EVERY = 10**6
_BATCH = 4096


class SolverKind(str, enum.Enum):
    PlainRK = "rk"
    PlainRGS = "rgs"
    RKRidge = "rk-ridge"
    RGSRidge = "rgs-ridge"
    NaiveRKNormal = "naive-rk"
    NaiveRGSNormal = "naive-rgs"
    IZ = "iz"


class IZInit(str, enum.Enum):
    IZ0 = "iz0"
    IZ1 = "iz1"
    IZMIX = "izmix"
    IZRND = "izrnd"


ALGORITHM_NAMES = tuple(k.value for k in SolverKind)
METRICS = ("err_beta", "err_normal", "err_weighted", "noop_count")


@dataclass(slots=True)
class StepReport:
    picked_kind: str  # "row" or "column"
    picked_index: int
    delta_magnitude: float
    was_noop: bool
    scale: float = 0.0


@dataclass(eq=False)
class SolverState:
    kind: SolverKind
    beta: np.ndarray
    alpha: np.ndarray | None = None
    mirror: np.ndarray | None = None
    iteration: int = 0
    rng: np.random.Generator | None = None
    sampler: densela.WeightedSampler | None = None
    iz_init: IZInit | None = None
    noop_count: int = 0
    refresh_every: int = DEFAULT_REFRESH_EVERY
    # naive variants run on the n x n system (X^T X + lam I) beta = X^T y
    system: tuple | None = None
    _buffer: list = field(default_factory=list, repr=False)
    _pos: int = 0

    def next_index(self) -> int:
        if self._pos >= len(self._buffer):
            self._buffer = self.sampler.sample_many(self.rng, _BATCH).tolist()
            self._pos = 0
        i = self._buffer[self._pos]
        self._pos += 1
        return i

    def current_beta(self) -> np.ndarray:
        """Primal iterate; for RK-ridge this is the tracked X^T alpha."""
        if self.kind is SolverKind.RKRidge:
            return self.mirror
        return self.beta

    def refresh_mirror(self, X, y):
        if self.kind is SolverKind.RKRidge:
            self.mirror[:] = X.T @ self.alpha
        elif self.kind in (SolverKind.RGSRidge, SolverKind.PlainRGS):
            self.mirror[:] = y - X @ self.beta
        elif self.kind is SolverKind.NaiveRGSNormal:
            M, b = self.system
            self.mirror[:] = b - M @ self.beta

    def _tick(self, X, y, noop):
        self.iteration += 1
        if noop:
            self.noop_count += 1
        if self.iteration % self.refresh_every == 0:
            self.refresh_mirror(X, y)


def _report(kind, idx, num, terms, unit):
    """StepReport for a step whose residual numerator is ``num``.

    ``terms`` is the summed magnitude of what was subtracted to form ``num``
    and ``unit`` converts a numerator into the size of the applied change,
    so ``scale`` is the change the step would make if nothing cancelled.
    """
    delta = abs(num) / unit
    scale = terms / unit
    return StepReport(kind, idx, delta, delta <= NOOP_RTOL * (1.0 + scale), scale)


def init(kind, problem, iz_init=None, seed=0, refresh_every=DEFAULT_REFRESH_EVERY):
    """Fresh solver state for ``problem`` (anything with X, y and lam)."""
    kind = SolverKind(kind)
    X, y, lam = problem.X, problem.y, float(problem.lam)
    m, n = X.shape
    if (iz_init is None) != (kind is not SolverKind.IZ):
        raise ValueError("iz requires an IZ initialization" if kind is SolverKind.IZ
                         else f"{kind.value} takes no IZ initialization")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    rng = densela.make_rng(seed)
    state = SolverState(kind=kind, beta=np.zeros(n), rng=rng,
                        refresh_every=int(refresh_every))
    if kind is SolverKind.PlainRK:
        state.sampler = densela.WeightedSampler(densela.row_norms_sq(X))
    elif kind is SolverKind.PlainRGS:
        state.sampler = densela.WeightedSampler(densela.col_norms_sq(X))
        state.mirror = np.array(y, dtype=np.float64)
    elif kind is SolverKind.RKRidge:
        state.sampler = densela.WeightedSampler(densela.row_norms_sq(X) + lam)
        state.alpha = np.zeros(m)
        state.mirror = np.zeros(n)
    elif kind is SolverKind.RGSRidge:
        state.sampler = densela.WeightedSampler(densela.col_norms_sq(X) + lam)
        state.mirror = np.array(y, dtype=np.float64)
    elif kind in (SolverKind.NaiveRKNormal, SolverKind.NaiveRGSNormal):
        M = X.T @ X + lam * np.eye(n)
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        b = X.T @ y
        state.system = (M, b)
        # M is symmetric, so row and column norms coincide
        state.sampler = densela.WeightedSampler(densela.row_norms_sq(M))
        if kind is SolverKind.NaiveRGSNormal:
            state.mirror = b.copy()
    else:
        iz_init = IZInit(iz_init)
        if not lam > 0:
            raise ValueError("iz needs lambda > 0")
        state.iz_init = iz_init
        root = math.sqrt(lam)
        if iz_init is IZInit.IZ0:
            state.alpha = np.zeros(m)
        elif iz_init is IZInit.IZ1:
            state.alpha = np.asarray(y, dtype=np.float64) / root
        elif iz_init is IZInit.IZMIX:
            state.alpha = np.asarray(y, dtype=np.float64) / (2.0 * root)
        else:
            state.alpha = rng.standard_normal(m)
            state.beta = rng.standard_normal(n)
        weights = np.concatenate([densela.row_norms_sq(X), densela.col_norms_sq(X)]) + lam
        state.sampler = densela.WeightedSampler(weights)
    return state


def plain_rk_step(state, X, y, lam=None, index=None) -> StepReport:
    i = state.next_index() if index is None else index
    row = X[i]
    beta = state.beta
    dot = float(row @ beta)
    num = y[i] - dot
    w = state.sampler.weights[i]
    beta += (num / w) * row
    rep = _report("row", i, num, abs(y[i]) + abs(dot), math.sqrt(w))
    state._tick(X, y, rep.was_noop)
    return rep


def plain_rgs_step(state, X, y, lam=None, index=None) -> StepReport:
    j = state.next_index() if index is None else index
    col = X[:, j]
    r = state.mirror
    w = state.sampler.weights[j]
    num = float(col @ r)
    d = num / w
    rep = _report("column", j, num, abs(state.beta[j]) * w, w)
    state.beta[j] += d
    r -= d * col
    state._tick(X, y, rep.was_noop)
    return rep


def rk_ridge_step(state, X, y, lam, index=None) -> StepReport:
    """Coordinate step on (X X^T + lam I) alpha = y, tracking beta = X^T alpha."""
    i = state.next_index() if index is None else index
    row = X[i]
    alpha = state.alpha
    w = state.sampler.weights[i]
    dot = float(row @ state.mirror)
    shrink = lam * alpha[i]
    num = y[i] - dot - shrink
    d = num / w
    alpha[i] += d
    state.mirror += d * row
    rep = _report("row", i, num, abs(y[i]) + abs(dot) + abs(shrink), w)
    state._tick(X, y, rep.was_noop)
    return rep


def rgs_ridge_step(state, X, y, lam, index=None) -> StepReport:
    """Coordinate step on (X^T X + lam I) beta = X^T y, tracking r = y - X beta."""
    j = state.next_index() if index is None else index
    col = X[:, j]
    beta = state.beta
    w = state.sampler.weights[j]
    dot = float(col @ state.mirror)
    shrink = lam * beta[j]
    num = dot - shrink
    d = num / w
    beta[j] += d
    state.mirror -= d * col
    rep = _report("column", j, num, abs(dot) + abs(shrink), w)
    state._tick(X, y, rep.was_noop)
    return rep


def naive_normal_step(state, X, y, lam, index=None) -> StepReport:
    """Plain RK or RGS applied verbatim to the regularized normal equations."""
    M, b = state.system
    k = state.next_index() if index is None else index
    beta = state.beta
    vec = M[k]
    w = state.sampler.weights[k]
    if state.kind is SolverKind.NaiveRKNormal:
        dot = float(vec @ beta)
        num = b[k] - dot
        beta += (num / w) * vec
        rep = _report("row", k, num, abs(b[k]) + abs(dot), math.sqrt(w))
    else:
        num = float(vec @ state.mirror)
        d = num / w
        rep = _report("column", k, num, abs(beta[k]) * w, w)
        beta[k] += d
        state.mirror -= d * vec
    state._tick(X, y, rep.was_noop)
    return rep


def iz_step(state, X, y, lam, index=None) -> StepReport:
    """Kaczmarz step on one row of the augmented system.

    Indices below m are equations sqrt(lam) alpha'_i + X^i beta = y_i;
    index m + j is the equation X_(j)^T alpha' = sqrt(lam) beta_j.
    ``delta_magnitude`` is the Euclidean length of the change to
    (alpha', beta).
    """
    m = X.shape[0]
    k = state.next_index() if index is None else index
    root = math.sqrt(lam)
    alpha, beta = state.alpha, state.beta
    w = state.sampler.weights[k]
    if k < m:
        row = X[k]
        dot = float(row @ beta)
        a = root * alpha[k]
        num = y[k] - a - dot
        c = num / w
        alpha[k] += c * root
        beta += c * row
        terms = abs(y[k]) + abs(a) + abs(dot)
        kind, idx = "row", k
    else:
        j = k - m
        col = X[:, j]
        dot = float(col @ alpha)
        b = root * beta[j]
        num = b - dot
        c = num / w
        alpha += c * col
        beta[j] -= c * root
        terms = abs(b) + abs(dot)
        kind, idx = "column", j
    rep = _report(kind, idx, num, terms, math.sqrt(w))
    state._tick(X, y, rep.was_noop)
    return rep


STEP_FUNCTIONS = {
    SolverKind.PlainRK: plain_rk_step,
    SolverKind.PlainRGS: plain_rgs_step,
    SolverKind.RKRidge: rk_ridge_step,
    SolverKind.RGSRidge: rgs_ridge_step,
    SolverKind.NaiveRKNormal: naive_normal_step,
    SolverKind.NaiveRGSNormal: naive_normal_step,
    SolverKind.IZ: iz_step,
}


def step(state, X, y, lam, index=None) -> StepReport:
    return STEP_FUNCTIONS[state.kind](state, X, y, lam, index)


@dataclass
class TraceRecord:
    algorithm: str
    iz_init: str
    m: int
    n: int
    lam: float
    sigma_min: float
    trial: int
    iteration: int
    err_beta: float
    err_normal: float
    err_weighted: float
    noop_count: int
    wall_ns: int


class _Metrics:
    def __init__(self, X, y, lam, oracle, kind, wanted):
        self.X, self.lam, self.oracle, self.kind = X, lam, oracle, kind
        self.Xty = X.T @ y
        self.wanted = set(wanted)
        unknown = self.wanted - set(METRICS)
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}")

    def __call__(self, state):
        X, lam, o = self.X, self.lam, self.oracle
        beta = state.current_beta()
        nan = float("nan")
        err_beta = float(np.linalg.norm(beta - o.beta_star))
        err_normal = nan
        if "err_normal" in self.wanted:
            err_normal = float(np.linalg.norm(X.T @ (X @ beta) - self.Xty))
        err_weighted = nan
        if "err_weighted" in self.wanted:
            if self.kind is SolverKind.RKRidge:
                d = state.alpha - o.alpha_star
                v = X.T @ d
            elif self.kind is SolverKind.RGSRidge:
                d = beta - o.beta_star
                v = X @ d
            else:
                d = v = None
            if d is None:
                err_weighted = err_beta
            else:
                err_weighted = math.sqrt(float(v @ v) + lam * float(d @ d))
        if "err_beta" not in self.wanted:
            err_beta = nan
        return err_beta, err_normal, err_weighted


def run(state, X, y, lam, steps, trace_every, oracle, metrics=METRICS,
        sigma_min=float("nan"), trial=0, wall_clock=False):
    """Advance ``state`` by ``steps`` iterations, tracing every ``trace_every``.

    Returns one TraceRecord at iteration 0 and at each multiple of
    ``trace_every``. Metrics not requested are NaN. ``wall_ns`` stays 0
    unless ``wall_clock`` is set, which keeps traces byte-reproducible.
    """
    if steps < 1 or trace_every < 1:
        raise ValueError("steps and trace_every must be >= 1")
    m, n = X.shape
    measure = _Metrics(X, y, lam, oracle, state.kind, metrics)
    fn = STEP_FUNCTIONS[state.kind]
    name = state.kind.value
    init_name = state.iz_init.value if state.iz_init is not None else ""
    t0 = time.perf_counter_ns()
    records = []

    def record(it):
        eb, en, ew = measure(state)
        records.append(TraceRecord(
            name, init_name, m, n, float(lam), float(sigma_min), int(trial), it,
            eb, en, ew, state.noop_count,
            time.perf_counter_ns() - t0 if wall_clock else 0,
        ))

    record(0)
    done = 0
    while done < steps:
        chunk = min(trace_every, steps - done)
        for _ in range(chunk):
            fn(state, X, y, lam)
        done += chunk
        if done % trace_every == 0:
            record(done)
    return records
