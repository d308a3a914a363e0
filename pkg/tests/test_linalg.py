import numpy as np
import pytest

from blockpf.errors import NotPositiveSemidefinite
from blockpf.linalg import cholesky_psd, sample_mvn, sym_eigen
from blockpf.rng import derive_stream


class TestCholesky:
    def test_identity(self):
        assert np.allclose(cholesky_psd(np.eye(3)), np.eye(3))

    def test_hand_factorization(self):
        a = np.array([[4.0, 2.0], [2.0, 3.0]])
        expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
        assert np.allclose(cholesky_psd(a), expected)

    def test_diagonal(self):
        assert np.allclose(cholesky_psd(np.diag([9.0, 4.0, 1.0])), np.diag([3.0, 2.0, 1.0]))

    def test_zero_matrix(self):
        l = cholesky_psd(np.zeros((4, 4)))
        assert np.allclose(l @ l.T, 0)

    def test_singular_psd(self):
        # rank-1 matrix: needs the jitter path but must still reproduce A
        v = np.array([1.0, 2.0, 3.0])
        a = np.outer(v, v)
        l = cholesky_psd(a)
        assert np.allclose(l @ l.T, a, atol=1e-6)

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveSemidefinite):
            cholesky_psd(np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_reconstruction_random_psd(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            m = rng.standard_normal((8, 8))
            a = m @ m.T
            l = cholesky_psd(a)
            assert np.allclose(l @ l.T, a, atol=1e-8)


class TestSymEigen:
    def test_identity(self):
        vals, _ = sym_eigen(np.eye(4))
        assert np.allclose(vals, 1.0)

    def test_diagonal_sorted(self):
        vals, vecs = sym_eigen(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(vals, [1.0, 2.0, 3.0])
        # coordinate eigenvectors up to sign
        assert np.allclose(np.abs(vecs[:, 0]), [0, 1, 0])
        assert np.allclose(np.abs(vecs[:, 2]), [1, 0, 0])

    def test_two_by_two_hand(self):
        vals, vecs = sym_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(vals, [1.0, 3.0])
        assert np.allclose(np.abs(vecs[:, 0]), [1, 1] / np.sqrt(2))
        assert np.allclose(np.abs(vecs[:, 1]), [1, 1] / np.sqrt(2))

    @pytest.mark.parametrize("dim", [2, 10, 50, 200])
    def test_reconstruction_residual(self, dim):
        rng = np.random.default_rng(dim)
        m = rng.standard_normal((dim, dim))
        a = 0.5 * (m + m.T)
        vals, vecs = sym_eigen(a)
        recon = vecs @ np.diag(vals) @ vecs.T
        rel = np.linalg.norm(recon - a) / np.linalg.norm(a)
        assert rel < 1e-8
        assert np.all(np.diff(vals) >= -1e-12)
        assert np.allclose(vecs.T @ vecs, np.eye(dim), atol=1e-8)


class TestSampleMvn:
    def test_zero_covariance(self):
        rng = derive_stream(0, "mvn")
        mean = np.array([1.0, -2.0])
        x = sample_mvn(mean, np.zeros((2, 2)), rng)
        assert np.array_equal(x, mean)

    def test_standard_normal_mean(self):
        rng = derive_stream(1, "mvn")
        n = 10**5
        x = sample_mvn(np.zeros(3), np.eye(3), rng, size=n)
        assert x.shape == (3, n)
        assert np.all(np.abs(x.mean(axis=1)) < 4.0 / np.sqrt(n))

    def test_deterministic_repeat(self):
        a = sample_mvn(np.zeros(2), np.eye(2), derive_stream(9, "s"), size=10)
        b = sample_mvn(np.zeros(2), np.eye(2), derive_stream(9, "s"), size=10)
        assert np.array_equal(a, b)

    def test_covariance_shaping(self):
        rng = derive_stream(2, "mvn")
        l = cholesky_psd(np.array([[2.0, 1.0], [1.0, 2.0]]))
        x = sample_mvn(np.zeros(2), l, rng, size=10**5)
        emp = np.cov(x)
        assert np.allclose(emp, [[2, 1], [1, 2]], atol=0.1)
