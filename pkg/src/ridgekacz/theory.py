"""Convergence-rate constants and exact one-step expectations for ridge RK/RGS.

Everything here is deterministic: no sampling, just closed forms evaluated on
a given instance and iterate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import densela
from .solvers import SolverKind

ORACLE_RTOL = 1e-8


class NormMatrix(enum.Enum):
    KPrime = "K'"
    SigmaPrime = "Sigma'"
    Euclidean = "euclidean"
    XGram = "X*X"


class Regime(enum.Enum):
    OverDetermined = "overdetermined"
    UnderDetermined = "underdetermined"
    Square = "square"


def regime_of(m: int, n: int) -> Regime:
    if m > n:
        return Regime.OverDetermined
    if n > m:
        return Regime.UnderDetermined
    return Regime.Square


@dataclass(frozen=True)
class RateBound:
    """Per-iteration contraction of the expected squared error in ``norm_matrix``."""

    factor: float
    norm_matrix: NormMatrix
    applies_to: SolverKind
    regime: Regime

    def __post_init__(self):
        if not 0.0 <= self.factor <= 1.0:
            raise ValueError(f"contraction factor {self.factor} outside [0, 1]")


@dataclass(frozen=True)
class OracleSolutions:
    beta_star: np.ndarray
    alpha_star: np.ndarray
    alpha_prime_star: np.ndarray


def solve_primal(X, y, lam):
    """Ridge solution of (X^T X + lam I) beta = X^T y."""
    n = X.shape[1]
    return densela.solve_spd(X.T @ X + lam * np.eye(n), X.T @ y)


def solve_dual(X, y, lam):
    """Dual solution of (X X^T + lam I) alpha = y."""
    m = X.shape[0]
    return densela.solve_spd(X @ X.T + lam * np.eye(m), y)


def compute_oracle(X, y, lam) -> OracleSolutions:
    """Exact ridge solutions, solving only the smaller of the two normal systems.

    The other solution follows from beta = X^T alpha and, for lam > 0,
    alpha = (y - X beta) / lam.
    """
    m, n = X.shape
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if n <= m:
        beta = solve_primal(X, y, lam)
        if lam > 0:
            alpha = (y - X @ beta) / lam
        else:
            # least-norm alpha with X^T alpha = beta
            alpha = X @ densela.solve_spd(X.T @ X, beta)
    else:
        alpha = solve_dual(X, y, lam)
        beta = X.T @ alpha
    return OracleSolutions(
        beta_star=beta, alpha_star=alpha, alpha_prime_star=math.sqrt(lam) * alpha
    )


def oracle_residuals(X, y, lam, oracle: OracleSolutions) -> dict:
    """Relative residuals of the oracle in both normal systems and the duality gap."""
    b, a = oracle.beta_star, oracle.alpha_star
    fro = math.sqrt(densela.frobenius_sq(X))
    primal = X.T @ (X @ b) + lam * b - X.T @ y
    dual = X @ (X.T @ a) + lam * a - y
    dual_scale = 1.0
    if lam == 0:
        # X X^T alpha = y need not be consistent; check its least-squares form
        dual = X.T @ dual
        dual_scale = fro
    return {
        "primal": float(np.linalg.norm(primal)
                        / ((fro**2 + lam) * np.linalg.norm(b) + fro * np.linalg.norm(y) + 1e-300)),
        "dual": float(np.linalg.norm(dual)
                      / (dual_scale * ((fro**2 + lam) * np.linalg.norm(a) + np.linalg.norm(y))
                         + 1e-300)),
        "duality": float(np.linalg.norm(b - X.T @ a) / (1.0 + np.linalg.norm(b))),
    }


def validate_oracle(X, y, lam, oracle, tol=ORACLE_RTOL):
    res = oracle_residuals(X, y, lam, oracle)
    bad = {k: v for k, v in res.items() if not v <= tol}
    if bad:
        raise ValueError(f"oracle validation failed: {bad}")
    return res


def _spectrum(spectrum):
    s = np.asarray(spectrum, dtype=np.float64)
    if s.size == 0 or np.any(s < 0) or np.any(np.diff(s) < 0):
        raise ValueError("spectrum must be nonempty, nonnegative and increasing")
    return s


def contraction_factor(kind, m: int, n: int, lam: float, spectrum) -> RateBound:
    """Per-step contraction constant for a solver on an m x n ridge problem.

    ``spectrum`` holds the min(m, n) singular values of X in increasing order;
    a rank-deficient X simply has leading zeros. For the square case the
    smallest eigenvalue of both X^T X + lam I and X X^T + lam I is
    sigma_1^2 + lam, which is what the formulas below use.
    """
    kind = SolverKind(kind)
    s = _spectrum(spectrum)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    regime = regime_of(m, n)
    fro2 = float(np.sum(s * s))
    s1 = float(s[0] ** 2)

    def ratio(num, den):
        return num / den if den > 0 else 0.0

    if kind is SolverKind.RKRidge:
        smallest = lam if regime is Regime.OverDetermined else s1 + lam
        factor = 1.0 - ratio(smallest, fro2 + m * lam)
        norm = NormMatrix.KPrime
    elif kind is SolverKind.RGSRidge:
        smallest = lam if regime is Regime.UnderDetermined else s1 + lam
        factor = 1.0 - ratio(smallest, fro2 + n * lam)
        norm = NormMatrix.SigmaPrime
    elif kind in (SolverKind.PlainRK, SolverKind.PlainRGS):
        factor = 1.0 - ratio(s1, fro2)
        norm = NormMatrix.Euclidean if kind is SolverKind.PlainRK else NormMatrix.XGram
    elif kind in (SolverKind.NaiveRKNormal, SolverKind.NaiveRGSNormal):
        # plain bound applied to M = X^T X + lam I (n x n)
        k = s.size
        eig_m = s * s + lam
        extra = n - k
        fro2_m = float(np.sum(eig_m**2)) + extra * lam * lam
        smallest = lam if extra > 0 else float(eig_m[0])
        factor = 1.0 - ratio(smallest * smallest, fro2_m)
        norm = (NormMatrix.Euclidean if kind is SolverKind.NaiveRKNormal
                else NormMatrix.XGram)
    else:
        raise ValueError(
            "no contraction factor for the augmented method; use iz_condition_check"
        )
    return RateBound(float(min(max(factor, 0.0), 1.0)), norm, kind, regime)


def k_prime_apply(X, lam, v):
    return X @ (X.T @ v) + lam * v


def sigma_prime_apply(X, lam, v):
    return X.T @ (X @ v) + lam * v


def weighted_error_sq(kind, X, lam, state, oracle: OracleSolutions) -> float:
    """Squared error in the norm that Theorem-style bounds contract."""
    kind = SolverKind(kind)
    if kind is SolverKind.RKRidge:
        d = state.alpha - oracle.alpha_star
        return float(d @ k_prime_apply(X, lam, d))
    if kind is SolverKind.RGSRidge:
        d = state.beta - oracle.beta_star
        return float(d @ sigma_prime_apply(X, lam, d))
    raise ValueError(f"no weighted norm defined for {kind.value}")


def expected_onestep_error(kind, X, y, lam, state, oracle: OracleSolutions) -> float:
    """Exact conditional expectation of the next weighted squared error.

    RK-ridge:  ||a - a*||^2_K' - ||y - K' a||^2 / (||X||_F^2 + m lam)
    RGS-ridge: ||b - b*||^2_S' - ||X^T y - S' b||^2 / (||X||_F^2 + n lam)
    """
    kind = SolverKind(kind)
    m, n = X.shape
    fro2 = densela.frobenius_sq(X)
    current = weighted_error_sq(kind, X, lam, state, oracle)
    if kind is SolverKind.RKRidge:
        r = y - k_prime_apply(X, lam, state.alpha)
        return current - float(r @ r) / (fro2 + m * lam)
    g = X.T @ y - sigma_prime_apply(X, lam, state.beta)
    return current - float(g @ g) / (fro2 + n * lam)


def bound_curve(bound: RateBound, initial_error: float, steps: int) -> np.ndarray:
    if initial_error < 0:
        raise ValueError("initial error must be nonnegative")
    t = np.arange(steps + 1)
    with np.errstate(under="ignore"):
        out = initial_error * np.power(bound.factor, t, dtype=np.float64)
    if bound.factor == 0.0:
        out[0] = initial_error
    return out


def build_augmented(X, lam) -> np.ndarray:
    """The (m+n) x (m+n) block matrix [[sqrt(lam) I, X], [X^T, -sqrt(lam) I]]."""
    if not lam > 0:
        raise ValueError("augmented system needs lambda > 0")
    m, n = X.shape
    r = math.sqrt(lam)
    A = np.zeros((m + n, m + n))
    A[:m, :m] = r * np.eye(m)
    A[:m, m:] = X
    A[m:, :m] = X.T
    A[m:, m:] = -r * np.eye(n)
    return A


DIRECT_EIG_LIMIT = 400


def iz_condition_check(X, lam, direct_limit=DIRECT_EIG_LIMIT):
    """Spectral condition numbers (cond_A, cond_M) of the augmented matrix A
    and of M = X^T X + lam I.

    Small problems are eigensolved directly. Above ``direct_limit`` both are
    read off the smaller Gram matrix instead: A^2 = diag(X X^T + lam I,
    X^T X + lam I), so |eig(A)| = sqrt(sigma_i^2 + lam) plus sqrt(lam) when
    m != n.
    """
    if not lam > 0:
        raise ValueError("condition check needs lambda > 0")
    m, n = X.shape
    if m + n <= direct_limit:
        ev_a = np.abs(densela.sym_eigenvalues(build_augmented(X, lam)))
        cond_a = float(ev_a.max() / ev_a.min())
        ev_m = densela.sym_eigenvalues(X.T @ X + lam * np.eye(n))
        cond_m = float(ev_m[-1] / ev_m[0])
        return cond_a, cond_m
    s = densela.singular_values(X)
    top = s[-1] ** 2 + lam
    low_m = lam if n > s.size else s[0] ** 2 + lam
    low_a = lam if m != n else s[0] ** 2 + lam
    return float(math.sqrt(top / low_a)), float(top / low_m)


def augmented_eigenvalues(spectrum, m, n, lam) -> np.ndarray:
    """Eigenvalues of the augmented matrix implied by the singular values of X."""
    s = _spectrum(spectrum)
    root = np.sqrt(s * s + lam)
    extra = abs(m - n)
    sign = 1.0 if m > n else -1.0
    vals = np.concatenate([root, -root, np.full(extra, sign * math.sqrt(lam))])
    return np.sort(vals)
