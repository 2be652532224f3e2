"""Small dense linear-algebra kernel used by the solvers and the theory checks.

Matrices are plain float64 numpy arrays, C-ordered (row-major) and marked
read-only once validated. Column access goes through strided views of the
same buffer; no transposed copy is kept.
"""

from __future__ import annotations

import numpy as np

SYMMETRY_TOL = 1e-12
SOLVE_RTOL = 1e-8
JACOBI_TOL = 1e-11
MAX_EIG_DIM = 2000
# above this the O(n^3)-per-sweep Jacobi is too slow in pure numpy; LAPACK takes over
JACOBI_LIMIT = 300

MM_HEADER = "%%MatrixMarket matrix array real general"


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class MatrixMarketError(ValueError):
    """Malformed MatrixMarket file; carries the offending line number."""

    def __init__(self, message, lineno=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)
        self.lineno = lineno
        self.path = path


def as_matrix(data) -> np.ndarray:
    """Validate and freeze a 2-D real matrix (row-major, finite entries)."""
    a = np.array(data, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    a.setflags(write=False)
    return a


def as_vector(data) -> np.ndarray:
    v = np.array(data, dtype=np.float64, copy=True).reshape(-1)
    if v.size < 1:
        raise ValueError("expected a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    v.setflags(write=False)
    return v


def _check_index(i, size, what):
    if not 0 <= i < size:
        raise IndexError(f"{what} index {i} out of range [0, {size})")


def row_norm_sq(X, i: int) -> float:
    _check_index(i, X.shape[0], "row")
    r = X[i]
    return float(r @ r)


def col_norm_sq(X, j: int) -> float:
    _check_index(j, X.shape[1], "column")
    c = X[:, j]
    return float(c @ c)


def row_norms_sq(X) -> np.ndarray:
    return np.einsum("ij,ij->i", X, X)


def col_norms_sq(X) -> np.ndarray:
    return np.einsum("ij,ij->j", X, X)


def frobenius_sq(X) -> float:
    return float(np.einsum("ij,ij->", X, X))


def is_symmetric(M, tol=SYMMETRY_TOL) -> bool:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(M))))
    return bool(np.max(np.abs(M - M.T)) <= tol * scale)


def weighted_norm_sq(z, M) -> float:
    """Quadratic form <z, M z> for symmetric positive semidefinite M."""
    z = np.asarray(z, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != z.shape[0]:
        raise ValueError(
            f"dimension mismatch: vector of length {z.shape[0]}, matrix {M.shape}"
        )
    if not is_symmetric(M):
        raise ValueError("weighted norm needs a symmetric matrix")
    return float(z @ (M @ z))


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 stream; the only random source in the package."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


class WeightedSampler:
    """Draws index ``i`` with probability ``weights[i] / total``.

    Inversion sampling over the prefix sums: a uniform ``u`` in (0, 1] picks
    the first ``i`` with ``u * total <= cumulative[i]``. Zero-weight entries
    can never be returned because ``u * total`` is strictly positive.
    """

    def __init__(self, weights):
        w = np.array(weights, dtype=np.float64).reshape(-1)
        if w.size == 0:
            raise ValueError("sampler needs at least one weight")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("sampler weights must be finite and nonnegative")
        self.weights = w
        self.cumulative = np.cumsum(w)
        self.total = float(self.cumulative[-1])
        if not self.total > 0:
            raise ValueError("sampler weights are all zero")

    def __len__(self):
        return self.weights.size

    def index_of(self, u):
        """Index selected by uniform value(s) ``u`` in (0, 1]."""
        idx = np.searchsorted(self.cumulative, np.asarray(u) * self.total, side="left")
        # u == 1 with rounding in cumsum can land one past the end
        return np.minimum(idx, self.weights.size - 1)

    def sample(self, rng) -> int:
        return int(self.index_of(1.0 - rng.random()))

    def sample_many(self, rng, size: int) -> np.ndarray:
        return self.index_of(1.0 - rng.random(size))

    def probabilities(self) -> np.ndarray:
        return self.weights / self.total


def cholesky(M) -> np.ndarray:
    """Lower-triangular L with L L^T = M (left-looking, column at a time)."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"cholesky needs a square matrix, got {M.shape}")
    L = np.zeros((n, n))
    for j in range(n):
        col = M[j:, j] - L[j:, :j] @ L[j, :j]
        pivot = col[0]
        if not pivot > 0 or not np.isfinite(pivot):
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite (pivot {pivot:.3g} at {j})"
            )
        d = np.sqrt(pivot)
        L[j, j] = d
        L[j + 1 :, j] = col[1:] / d
    return L


def solve_lower(L, b):
    n = L.shape[0]
    x = np.zeros(n)
    for i in range(n):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def solve_upper(U, b):
    n = U.shape[0]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - U[i, i + 1 :] @ x[i + 1 :]) / U[i, i]
    return x


def solve_spd(M, b) -> np.ndarray:
    """Solve M x = b for symmetric positive definite M via Cholesky."""
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if M.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {M.shape} vs {b.shape[0]}")
    L = cholesky(M)
    return solve_upper(L.T, solve_lower(L, b))


def _round_robin(n):
    """Pairings for a parallel Jacobi sweep: n-1 rounds (n even) of disjoint pairs."""
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        p, q = [], []
        for k in range(size // 2):
            a, b = players[k], players[size - 1 - k]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _off_norm(A):
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.sqrt(np.sum(off * off)))


def sym_eigenvalues(M, tol=JACOBI_TOL, max_sweeps=60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, increasing, by cyclic Jacobi rotations.

    Rotations are applied in round-robin order so that each round touches
    disjoint (p, q) pairs; a round is then a single vectorized update.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"eigenvalues need a square matrix, got {M.shape}")
    n = M.shape[0]
    if n > MAX_EIG_DIM:
        raise ValueError(f"dimension {n} exceeds the eigensolver limit {MAX_EIG_DIM}")
    if not is_symmetric(M):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (M + M.T)
    if n == 1:
        return A[0].copy()
    fro = float(np.sqrt(np.sum(A * A)))
    target = tol * fro
    rounds = _round_robin(n)
    converged_sweeps = 0
    for _ in range(max_sweeps):
        if _off_norm(A) <= target:
            # one extra sweep; convergence is quadratic so this costs little
            converged_sweeps += 1
            if converged_sweeps > 1:
                break
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            # tiny a_pq relative to the diagonal gap: rotation angle is ~0
            nz = np.abs(apq) > 1e-300 * np.maximum(np.abs(aqq - app), 1.0)
            theta = np.divide(aqq - app, 2.0 * apq, out=np.zeros_like(apq), where=nz)
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            t = np.where(nz, sgn / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rp = A[p, :]
            rq = A[q, :]
            A[p, :] = c[:, None] * rp - s[:, None] * rq
            A[q, :] = s[:, None] * rp + c[:, None] * rq
            cp = A[:, p]
            cq = A[:, q]
            A[:, p] = cp * c - cq * s
            A[:, q] = cp * s + cq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
    else:
        if _off_norm(A) > target:
            raise np.linalg.LinAlgError("Jacobi iteration did not converge")
    return np.sort(np.diag(A).copy())


def singular_values(X) -> np.ndarray:
    """min(m, n) singular values, increasing, from the smaller Gram matrix.

    Gram matrices larger than JACOBI_LIMIT go to LAPACK's symmetric solver.
    """
    m, n = X.shape
    G = X.T @ X if n <= m else X @ X.T
    G = 0.5 * (G + G.T)
    ev = sym_eigenvalues(G) if G.shape[0] <= JACOBI_LIMIT else np.linalg.eigvalsh(G)
    return np.sqrt(np.clip(ev, 0.0, None))


def write_mtx(path, a, comment=None):
    """Write a dense matrix (or vector as n x 1) in MatrixMarket array format."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    rows, cols = a.shape
    lines = [MM_HEADER]
    if comment:
        lines.extend("%" + line for line in comment.splitlines())
    lines.append(f"{rows} {cols}")
    # array format stores entries column by column
    lines.extend(f"{v:.17g}" for v in a.T.reshape(-1))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mtx(path) -> np.ndarray:
    """Read a MatrixMarket dense real array file into a 2-D float64 array."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read().split("\n")
    if not text or text[0].strip().lower().split() != MM_HEADER.lower().split():
        raise MatrixMarketError(f"expected header '{MM_HEADER}'", 1, path)
    k = 1
    while k < len(text) and (text[k].startswith("%") or not text[k].strip()):
        k += 1
    if k >= len(text):
        raise MatrixMarketError("missing size line", k + 1, path)
    parts = text[k].split()
    try:
        rows, cols = (int(p) for p in parts)
    except ValueError:
        raise MatrixMarketError(f"bad size line {text[k]!r}", k + 1, path) from None
    if rows < 1 or cols < 1:
        raise MatrixMarketError(f"bad dimensions {rows}x{cols}", k + 1, path)
    values = []
    for lineno in range(k + 2, len(text) + 1):
        line = text[lineno - 1].strip()
        if not line or line.startswith("%"):
            continue
        try:
            v = float(line)
        except ValueError:
            raise MatrixMarketError(f"bad value {line!r}", lineno, path) from None
        if not np.isfinite(v):
            raise MatrixMarketError(f"non-finite value {line!r}", lineno, path)
        values.append(v)
    expected = rows * cols
    if len(values) != expected:
        raise MatrixMarketError(
            f"expected {expected} entries, found {len(values)}", len(text), path
        )
    return np.array(values).reshape(cols, rows).T.copy()
