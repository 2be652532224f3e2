"""Synthetic ridge-regression instances with a prescribed singular spectrum."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dgemv, dger

from . import densela
from .theory import OracleSolutions, compute_oracle, validate_oracle

MAX_RETRIES = 3


class GramSchmidtBreakdown(np.linalg.LinAlgError):
    pass


class InstanceFormatError(ValueError):
    pass


@dataclass(eq=False)
class ProblemInstance:
    X: np.ndarray
    y: np.ndarray
    lam: float
    beta_true: np.ndarray | None = None
    sigma_min: float | None = None
    seed: int | None = None
    oracle: OracleSolutions | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, X, y, lam, beta_true=None, **meta):
        """Wrap user data, validating shapes and computing the ridge oracle."""
        X = densela.as_matrix(X)
        y = densela.as_vector(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"y has length {y.shape[0]}, X has {X.shape[0]} rows")
        if beta_true is not None:
            beta_true = densela.as_vector(beta_true)
        p = cls(X, y, float(lam), beta_true, **meta)
        p.oracle = compute_oracle(X, y, p.lam)
        return p


def prescribed_spectrum(k: int, sigma_min: float) -> np.ndarray:
    """Geometric decay from 1.0 down to sigma_min over k values (descending)."""
    if k == 1:
        return np.ones(1)
    i = np.arange(k)
    return sigma_min ** (i / (k - 1))


def mgs(A, reorthogonalize=True):
    """Modified Gram-Schmidt on the columns of A, optionally run twice.

    Right-looking form: once column j is normalized its component is removed
    from every later column with one BLAS rank-1 update.
    """
    Q = np.array(A, dtype=np.float64, order="F")
    k = Q.shape[1]
    for _ in range(2 if reorthogonalize else 1):
        norms0 = np.linalg.norm(Q, axis=0)
        for j in range(k):
            q = Q[:, j]
            nrm = float(np.linalg.norm(q))
            if not nrm > 1e-10 * max(norms0[j], 1e-300):
                raise GramSchmidtBreakdown(f"column {j} is numerically dependent")
            q /= nrm
            if j + 1 < k:
                rest = Q[:, j + 1 :]
                h = dgemv(1.0, rest, q, trans=1)
                out = dger(-1.0, q, h, a=rest, overwrite_a=1)
                if not np.shares_memory(out, rest):
                    rest[...] = out
    return Q


def _draw(m, n, sigma_min, seed):
    rng = densela.make_rng(seed)
    k = min(m, n)
    U = mgs(rng.standard_normal((m, k)))
    V = mgs(rng.standard_normal((n, k)))
    s = prescribed_spectrum(k, sigma_min)
    X = (U * s) @ V.T
    beta_true = rng.standard_normal(n)
    noise = rng.standard_normal(m)
    y = X @ beta_true + noise
    return X, y, beta_true


def generate(m, n, sigma_min, lam, seed) -> ProblemInstance:
    """Random instance X = U S V^T with orthonormal U, V and y = X beta + noise.

    On a Gram-Schmidt breakdown the draw is repeated with seed + attempt
    (at most three retries); the instance keeps the requested seed.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if not 0 < sigma_min <= 1:
        raise ValueError("sigma-min must be in (0,1]")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    for attempt in range(MAX_RETRIES + 1):
        try:
            X, y, beta_true = _draw(m, n, sigma_min, (seed + attempt) & 0xFFFFFFFFFFFFFFFF)
            break
        except GramSchmidtBreakdown:
            if attempt == MAX_RETRIES:
                raise
    return ProblemInstance.from_arrays(
        X, y, lam, beta_true, sigma_min=float(sigma_min), seed=int(seed)
    )


META_FILE = "meta.txt"


def save(p: ProblemInstance, path):
    os.makedirs(path, exist_ok=True)
    densela.write_mtx(os.path.join(path, "X.mtx"), p.X)
    densela.write_mtx(os.path.join(path, "y.mtx"), p.y)
    if p.beta_true is not None:
        densela.write_mtx(os.path.join(path, "beta_true.mtx"), p.beta_true)
    lines = [f"m={p.m}", f"n={p.n}", f"lambda={p.lam:.17g}"]
    if p.sigma_min is not None:
        lines.append(f"sigma_min={p.sigma_min:.17g}")
    if p.seed is not None:
        lines.append(f"seed={p.seed}")
    with open(os.path.join(path, META_FILE), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_meta(path):
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InstanceFormatError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = key.strip(), value.strip()
            try:
                if key in ("m", "n", "seed"):
                    meta[key] = int(value)
                elif key in ("lambda", "sigma_min"):
                    meta[key] = float(value)
                else:
                    raise InstanceFormatError(f"{path}:{lineno}: unknown key {key!r}")
            except ValueError as exc:
                if isinstance(exc, InstanceFormatError):
                    raise
                raise InstanceFormatError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    for key in ("m", "n", "lambda"):
        if key not in meta:
            raise InstanceFormatError(f"{path}: missing key {key!r}")
    return meta


def load(path) -> ProblemInstance:
    """Read an instance directory; the oracle is recomputed and revalidated."""
    meta = _read_meta(os.path.join(path, META_FILE))
    X = densela.read_mtx(os.path.join(path, "X.mtx"))
    y = densela.read_mtx(os.path.join(path, "y.mtx"))
    bt_path = os.path.join(path, "beta_true.mtx")
    beta_true = densela.read_mtx(bt_path) if os.path.exists(bt_path) else None
    m, n = meta["m"], meta["n"]
    if X.shape != (m, n):
        raise InstanceFormatError(f"{path}: X is {X.shape[0]}x{X.shape[1]}, metadata says {m}x{n}")
    if y.shape != (m, 1):
        raise InstanceFormatError(f"{path}: y must be {m}x1, found {y.shape[0]}x{y.shape[1]}")
    if beta_true is not None and beta_true.shape != (n, 1):
        raise InstanceFormatError(f"{path}: beta_true must be {n}x1")
    if meta["lambda"] < 0 or not math.isfinite(meta["lambda"]):
        raise InstanceFormatError(f"{path}: lambda must be a nonnegative number")
    try:
        p = ProblemInstance.from_arrays(
            X, y[:, 0], meta["lambda"],
            None if beta_true is None else beta_true[:, 0],
            sigma_min=meta.get("sigma_min"), seed=meta.get("seed"),
        )
        validate_oracle(p.X, p.y, p.lam, p.oracle)
    except np.linalg.LinAlgError as exc:
        raise InstanceFormatError(f"{path}: oracle recomputation failed: {exc}") from None
    except ValueError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from None
    return p
