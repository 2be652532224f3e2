import math
import os
import tempfile

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ridgekacz import densela

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def matrices(max_dim=8):
    shape = st.tuples(st.integers(1, max_dim), st.integers(1, max_dim))
    return shape.flatmap(lambda s: arrays(np.float64, s, elements=finite))


# norms


def test_row_and_col_norm_examples():
    assert densela.row_norm_sq(np.array([[3.0, 4.0]]), 0) == 25
    assert densela.row_norm_sq(np.eye(2), 1) == 1
    assert densela.col_norm_sq(np.array([[3.0], [4.0]]), 0) == 25
    assert densela.col_norm_sq(np.eye(2), 0) == 1


def test_norms_match_elementwise_recomputation():
    X = np.random.default_rng(7).standard_normal((5, 3))
    for i in range(5):
        assert densela.row_norm_sq(X, i) == pytest.approx(sum(X[i, j] ** 2 for j in range(3)), rel=1e-14)
    Y = np.random.default_rng(11).standard_normal((4, 6))
    for j in range(6):
        assert densela.col_norm_sq(Y, j) == pytest.approx(sum(Y[i, j] ** 2 for i in range(4)), rel=1e-14)


@pytest.mark.parametrize("i", [-1, 2, 10])
def test_norm_index_out_of_range(i):
    with pytest.raises(IndexError):
        densela.row_norm_sq(np.eye(2), i)
    with pytest.raises(IndexError):
        densela.col_norm_sq(np.eye(2), i)


def test_frobenius_examples():
    assert densela.frobenius_sq(np.eye(3)) == 3
    assert densela.frobenius_sq(np.array([[1.0, 2.0], [3.0, 4.0]])) == 30
    X = np.random.default_rng(3).standard_normal((10, 4))
    s = np.linalg.svd(X, compute_uv=False)
    assert densela.frobenius_sq(X) == pytest.approx(float(np.sum(s**2)), rel=1e-10)


@given(matrices())
def test_frobenius_equals_row_and_column_sums(X):
    f = densela.frobenius_sq(X)
    rows = sum(densela.row_norm_sq(X, i) for i in range(X.shape[0]))
    cols = sum(densela.col_norm_sq(X, j) for j in range(X.shape[1]))
    assert rows == pytest.approx(f, rel=1e-12, abs=1e-300)
    assert cols == pytest.approx(f, rel=1e-12, abs=1e-300)


def test_weighted_norm_examples():
    assert densela.weighted_norm_sq(np.array([1.0, 1.0]), np.eye(2)) == 2
    assert densela.weighted_norm_sq(np.array([1.0, 0.0]), np.diag([4.0, 9.0])) == 4


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 10))
def test_weighted_norm_of_regularized_gram(seed, lam):
    r = np.random.default_rng(seed)
    X = r.standard_normal((8, 6))
    z = r.standard_normal(6)
    want = float(np.sum((X @ z) ** 2) + lam * np.sum(z**2))
    got = densela.weighted_norm_sq(z, X.T @ X + lam * np.eye(6))
    assert got == pytest.approx(want, rel=1e-10)


def test_weighted_norm_errors():
    with pytest.raises(ValueError):
        densela.weighted_norm_sq(np.ones(3), np.eye(2))
    with pytest.raises(ValueError):
        densela.weighted_norm_sq(np.ones(2), np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_as_matrix_is_readonly_and_finite():
    A = densela.as_matrix([[1, 2], [3, 4]])
    assert A.dtype == np.float64 and A.flags.c_contiguous and not A.flags.writeable
    with pytest.raises(ValueError):
        densela.as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        densela.as_vector([np.inf])


# sampling


def test_sampler_structure():
    s = densela.WeightedSampler([3.0, 0.0, 1.0])
    np.testing.assert_array_equal(s.cumulative, [3.0, 3.0, 4.0])
    assert s.total == 4.0
    np.testing.assert_allclose(s.probabilities(), [0.75, 0.0, 0.25])


def test_sampler_index_of_follows_cdf_boundaries():
    s = densela.WeightedSampler([1.0, 1.0, 2.0])
    # index i iff cumulative[i-1] < u*total <= cumulative[i]
    assert s.index_of(0.25) == 0
    assert s.index_of(0.2500001) == 1
    assert s.index_of(0.5) == 1
    assert s.index_of(0.51) == 2
    assert s.index_of(1.0) == 2


def test_zero_weight_never_sampled():
    s = densela.WeightedSampler([1.0, 0.0, 1.0])
    draws = s.sample_many(densela.make_rng(0), 20000)
    assert not np.any(draws == 1)


def test_singleton_always_zero():
    s = densela.WeightedSampler([1.0])
    rng = densela.make_rng(5)
    assert all(s.sample(rng) == 0 for _ in range(100))


def test_uniform_frequencies():
    s = densela.WeightedSampler([1.0, 1.0, 1.0, 1.0])
    freq = np.bincount(s.sample_many(densela.make_rng(1), 10**6), minlength=4) / 1e6
    assert np.all((freq >= 0.247) & (freq <= 0.253))


def test_skewed_frequencies():
    s = densela.WeightedSampler([3.0, 1.0])
    freq = np.bincount(s.sample_many(densela.make_rng(2), 10**6), minlength=2) / 1e6
    assert 0.747 <= freq[0] <= 0.753


@pytest.mark.parametrize("w", [[0.0, 0.0], [], [1.0, -1.0], [np.nan, 1.0], [np.inf]])
def test_sampler_rejects_bad_weights(w):
    with pytest.raises(ValueError):
        densela.WeightedSampler(w)


def test_rng_is_deterministic():
    a = densela.make_rng(99).random(5)
    b = densela.make_rng(99).random(5)
    np.testing.assert_array_equal(a, b)


# direct solves


def test_solve_spd_examples():
    np.testing.assert_allclose(densela.solve_spd(2 * np.eye(3), np.array([2.0, 4, 6])), [1, 2, 3])
    np.testing.assert_allclose(densela.solve_spd(np.array([[2.0, 1], [1, 2]]), np.array([3.0, 3])), [1, 1])


@pytest.mark.parametrize("n", [1, 12, 100, 500])
def test_solve_spd_residual(n):
    r = np.random.default_rng(n)
    A = r.standard_normal((n, n))
    M = A.T @ A + np.eye(n)
    b = r.standard_normal(n)
    x = densela.solve_spd(M, b)
    assert np.linalg.norm(M @ x - b) <= 1e-8 * (np.linalg.norm(M) * np.linalg.norm(x) + np.linalg.norm(b))


def test_cholesky_reconstructs():
    r = np.random.default_rng(4)
    A = r.standard_normal((7, 7))
    M = A @ A.T + 0.5 * np.eye(7)
    L = densela.cholesky(M)
    np.testing.assert_allclose(L @ L.T, M, rtol=1e-12, atol=1e-12)
    assert np.allclose(L, np.tril(L))


def test_not_positive_definite():
    with pytest.raises(densela.NotPositiveDefiniteError, match="not positive definite"):
        densela.solve_spd(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))


def test_triangular_solves():
    L = np.array([[2.0, 0, 0], [1, 3, 0], [4, 5, 6]])
    b = np.array([1.0, 2, 3])
    np.testing.assert_allclose(L @ densela.solve_lower(L, b), b)
    np.testing.assert_allclose(L.T @ densela.solve_upper(L.T, b), b)


# spectra


def test_eigen_examples():
    np.testing.assert_allclose(densela.sym_eigenvalues(np.diag([4.0, 1, 9])), [1, 4, 9])
    np.testing.assert_allclose(densela.sym_eigenvalues(np.array([[2.0, 1], [1, 2]])), [1, 3], rtol=1e-14)


def test_eigen_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        densela.sym_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_eigen_matches_lapack(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    M = A + A.T
    got = densela.sym_eigenvalues(M)
    want = np.linalg.eigvalsh(M)
    assert np.max(np.abs(got - want)) <= 1e-10 * max(np.linalg.norm(M), 1.0)


def test_eigen_with_clustered_spectrum():
    r = np.random.default_rng(8)
    Q, _ = np.linalg.qr(r.standard_normal((60, 60)))
    ev = np.concatenate([np.full(30, 1.0), np.full(29, 1.0 + 1e-9), [5.0]])
    M = (Q * ev) @ Q.T
    M = 0.5 * (M + M.T)
    np.testing.assert_allclose(densela.sym_eigenvalues(M), np.sort(ev), atol=1e-11 * 60)


def test_singular_value_examples():
    np.testing.assert_allclose(densela.singular_values(np.eye(3)), [1, 1, 1])
    np.testing.assert_allclose(densela.singular_values(np.array([[3.0, 0], [0, 4], [0, 0]])), [3, 4])


@pytest.mark.parametrize("shape", [(20, 7), (7, 20), (400, 310), (310, 400)])
def test_singular_values_match_svd(shape):
    X = np.random.default_rng(sum(shape)).standard_normal(shape)
    want = np.sort(np.linalg.svd(X, compute_uv=False))
    np.testing.assert_allclose(densela.singular_values(X), want, rtol=1e-9, atol=1e-12)


# MatrixMarket


def test_mtx_round_trip_bit_exact(tmp_path):
    A = np.random.default_rng(0).standard_normal((5, 3)) * 10.0 ** np.arange(-7, 8).reshape(5, 3)
    densela.write_mtx(tmp_path / "a.mtx", A)
    np.testing.assert_array_equal(densela.read_mtx(tmp_path / "a.mtx"), A)


def test_mtx_is_column_major(tmp_path):
    densela.write_mtx(tmp_path / "a.mtx", np.array([[1.0, 2.0], [3.0, 4.0]]), comment="hi")
    lines = (tmp_path / "a.mtx").read_text().splitlines()
    assert lines[0] == "%%MatrixMarket matrix array real general"
    assert lines[1] == "%hi"
    assert lines[2:] == ["2 2", "1", "3", "2", "4"]


def test_mtx_vector_is_column(tmp_path):
    densela.write_mtx(tmp_path / "v.mtx", np.array([1.0, 2.0, 3.0]))
    assert densela.read_mtx(tmp_path / "v.mtx").shape == (3, 1)


def test_mtx_truncated_reports_line(tmp_path):
    densela.write_mtx(tmp_path / "a.mtx", np.ones((3, 3)))
    text = (tmp_path / "a.mtx").read_text().splitlines()
    (tmp_path / "a.mtx").write_text("\n".join(text[:-2]) + "\n")
    with pytest.raises(densela.MatrixMarketError, match="expected 9 entries") as exc:
        densela.read_mtx(tmp_path / "a.mtx")
    assert exc.value.lineno is not None


@pytest.mark.parametrize("body,lineno", [
    ("%%MatrixMarket matrix coordinate real general\n1 1\n1\n", 1),
    ("%%MatrixMarket matrix array real general\n2 x\n", 2),
    ("%%MatrixMarket matrix array real general\n2 1\n1.0\nabc\n", 4),
    ("%%MatrixMarket matrix array real general\n1 1\nnan\n", 3),
])
def test_mtx_parse_errors(tmp_path, body, lineno):
    path = tmp_path / "bad.mtx"
    path.write_text(body)
    with pytest.raises(densela.MatrixMarketError) as exc:
        densela.read_mtx(path)
    assert exc.value.lineno == lineno
    assert f":{lineno}" in str(exc.value) or f"line {lineno}" in str(exc.value)


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_mtx_round_trip_property(A):
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "a.mtx")
        densela.write_mtx(p, A)
        B = densela.read_mtx(p)
    assert B.shape == A.shape
    assert np.array_equal(B, A) and all(math.copysign(1, b) == math.copysign(1, a)
                                        for a, b in zip(A.ravel(), B.ravel()))
