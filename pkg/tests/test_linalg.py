import numpy as np
import pytest
import scipy.sparse as sp

from heatkkt.linalg import (
    BandedMatrix,
    SingularMatrixError,
    band_factor,
    band_solve,
    band_solve_transpose,
    dense_factor,
    dense_inverse,
    dense_matvec,
    dense_solve,
    sparse_factor,
    sparse_matvec,
    sparse_solve,
)


def gauss_solve(a, b):
    """Textbook Gaussian elimination with partial pivoting, the test oracle."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        a[[k, p]] = a[[p, k]]
        b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] -= f * a[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - a[i, i + 1 :] @ x[i + 1 :]) / a[i, i]
    return x


def random_banded(rng, n, kl, ku):
    a = np.zeros((n, n))
    for i in range(n):
        lo, hi = max(0, i - kl), min(n, i + ku + 1)
        a[i, lo:hi] = rng.uniform(-1, 1, hi - lo)
        a[i, i] = np.sum(np.abs(a[i])) + 1.0
    return a


def residual_ok(a, x, b):
    norm_a = np.abs(a).sum(axis=1).max()
    return np.linalg.norm(a @ x - b, np.inf) <= 1e-10 * (norm_a * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf))


@pytest.mark.parametrize("n", [1, 3, 10])
def test_identity(n):
    f = band_factor(BandedMatrix.from_diagonals(n, {0: 1.0}))
    b = np.arange(1.0, n + 1)
    assert np.array_equal(band_solve(f, b), b)


def test_two_by_two():
    a = BandedMatrix.from_dense(np.array([[2.0, -1.0], [-1.0, 2.0]]), 1, 1)
    x = band_solve(band_factor(a), np.array([1.0, 0.0]))
    np.testing.assert_allclose(x, [2 / 3, 1 / 3], rtol=1e-15)


def test_band_against_gauss_oracle():
    rng = np.random.default_rng(7)
    a = random_banded(rng, 50, 7, 7)
    b = rng.standard_normal(50)
    f = band_factor(BandedMatrix.from_dense(a, 7, 7))
    ref = gauss_solve(a, b)
    np.testing.assert_allclose(band_solve(f, b), ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(band_solve_transpose(f, b), gauss_solve(a.T, b), rtol=1e-10, atol=1e-12)


def test_band_storage_round_trip():
    rng = np.random.default_rng(1)
    a = random_banded(rng, 9, 2, 3)
    bm = BandedMatrix.from_dense(a, 2, 3)
    np.testing.assert_array_equal(bm.to_dense(), a)
    np.testing.assert_allclose(bm.matvec(np.ones(9)), a.sum(axis=1))


def test_factor_solve_residual_many_instances():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 25))
        kl, ku = (int(rng.integers(0, n)) for _ in range(2))
        a = random_banded(rng, n, kl, ku)
        b = rng.standard_normal(n)
        fb = band_factor(BandedMatrix.from_dense(a, kl, ku))
        assert residual_ok(a, band_solve(fb, b), b)
        assert residual_ok(a.T, band_solve_transpose(fb, b), b)
        fd = dense_factor(a)
        assert residual_ok(a, dense_solve(fd, b), b)
        fs = sparse_factor(sp.csr_matrix(a))
        assert residual_ok(a, sparse_solve(fs, b), b)


def test_pivoting_handles_indefinite_band():
    a = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    f = band_factor(BandedMatrix.from_dense(a, 1, 1))
    np.testing.assert_allclose(a @ band_solve(f, np.ones(3)), np.ones(3), atol=1e-14)


@pytest.mark.parametrize("factor, wrap", [
    (band_factor, lambda a: BandedMatrix.from_dense(a, 1, 1)),
    (dense_factor, lambda a: a),
    (sparse_factor, sp.csr_matrix),
])
def test_singular_reports_pivot(factor, wrap):
    a = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularMatrixError):
        factor(wrap(a))


def test_dense_inverse_identity():
    np.testing.assert_array_equal(dense_inverse(np.eye(4)), np.eye(4))


def test_dense_solve_laplacian_in_time():
    a = np.array([[1.0, -0.9, 0.0], [-0.9, 1.81, -0.9], [0.0, -0.9, 1.81]])
    b = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(dense_solve(dense_factor(a), b), gauss_solve(a, b), rtol=1e-12)


def five_point_dense(nx, ny):
    """Hand-assembled 5-point Laplacian on an nx-by-ny interior grid, x fastest."""
    n = nx * ny
    a = np.zeros((n, n))
    for j in range(ny):
        for i in range(nx):
            p = j * nx + i
            a[p, p] = 4.0
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < nx and 0 <= jj < ny:
                    a[p, jj * nx + ii] = -1.0
    return a


def test_sparse_matvec_five_point():
    a = five_point_dense(3, 3)
    lap = sp.kron(sp.eye(3), sp.diags([-1, 2, -1], [-1, 0, 1], (3, 3))) + sp.kron(
        sp.diags([-1, 2, -1], [-1, 0, 1], (3, 3)), sp.eye(3)
    )
    x = np.random.default_rng(3).standard_normal(9)
    np.testing.assert_allclose(sparse_matvec(lap.tocsr(), x), dense_matvec(a, x), rtol=1e-14, atol=1e-14)


def test_multiple_right_hand_sides():
    rng = np.random.default_rng(5)
    a = random_banded(rng, 12, 3, 3)
    f = band_factor(BandedMatrix.from_dense(a, 3, 3))
    b = rng.standard_normal((12, 4))
    np.testing.assert_allclose(a @ band_solve(f, b), b, atol=1e-12)


def test_pivot_growth_recorded():
    f = band_factor(BandedMatrix.from_diagonals(4, {0: 2.0, 1: -1.0, -1: -1.0}))
    assert f.pivot_growth > 0
