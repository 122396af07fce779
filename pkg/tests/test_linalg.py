import numpy as np
import pytest

from symvi.errors import DimensionMismatch, NotPositiveDefinite
from symvi.linalg import (
    PDMatrix,
    cholesky,
    correlation_of,
    mahalanobis,
    normalized_cov,
    sqrt_pd,
)


def random_pd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T + d * np.eye(d))


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(
            cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), rtol=0, atol=0
        )

    def test_reconstruction(self):
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        L = cholesky(m)
        np.testing.assert_allclose(L @ L.T, m, rtol=1e-10)
        assert np.all(np.diag(L) > 0)
        assert np.allclose(L, np.tril(L))

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_near_singular_pivot_rejected(self):
        # Pivot below 1e-12 of the max diagonal counts as a PD failure.
        m = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-14]])
        with pytest.raises(NotPositiveDefinite):
            cholesky(m)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatch):
            cholesky(np.ones((2, 3)))


class TestPDMatrix:
    def test_cached_factor_reconstructs(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = PDMatrix(random_pd(rng, 4))
            np.testing.assert_allclose(m.chol @ m.chol.T, m.entries, rtol=1e-10)

    def test_asymmetric_rejected(self):
        m = np.eye(2)
        m[0, 1] = 1e-9
        with pytest.raises(NotPositiveDefinite):
            PDMatrix(m)

    def test_immutable(self):
        m = PDMatrix(np.eye(2))
        with pytest.raises(AttributeError):
            m.entries = np.zeros((2, 2))
        assert not m.entries.flags.writeable


class TestSqrtPd:
    def test_identity(self):
        for d in (1, 2, 5):
            np.testing.assert_allclose(sqrt_pd(np.eye(d)).entries, np.eye(d), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(
            sqrt_pd(np.diag([4.0, 9.0])).entries, np.diag([2.0, 3.0]), atol=1e-12
        )

    def test_reconstruction(self):
        m = np.array([[5.0, 4.0], [4.0, 5.0]])
        r = sqrt_pd(m).entries
        np.testing.assert_allclose(r @ r, m, rtol=1e-10)

    def test_reconstruction_random(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            m = random_pd(rng, 3)
            r = sqrt_pd(m).entries
            np.testing.assert_allclose(r @ r, m, rtol=1e-10)
            np.testing.assert_allclose(r, r.T, atol=1e-12)


class TestMahalanobis:
    def test_zero_at_center(self):
        m = PDMatrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert mahalanobis(np.array([1.0, -1.0]), np.array([1.0, -1.0]), m) == 0.0

    def test_identity_unit(self):
        assert mahalanobis(np.array([1.0, 0.0]), np.zeros(2), PDMatrix(np.eye(2))) == 1.0

    def test_brute_force_2x2(self):
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        dev = np.array([1.0, 1.0])
        # explicit 2x2 inverse: [[2,1],[1,2]]^-1 = (1/3) [[2,-1],[-1,2]]
        inv = np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0
        expected = np.sqrt(dev @ inv @ dev)
        np.testing.assert_allclose(mahalanobis(dev, np.zeros(2), m), expected, rtol=1e-12)

    def test_affine_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = random_pd(rng, 3)
            z = rng.standard_normal(3)
            nu = rng.standard_normal(3)
            a = rng.standard_normal((3, 3)) + 3 * np.eye(3)
            b = rng.standard_normal(3)
            lhs = mahalanobis(z, nu, m)
            rhs = mahalanobis(a @ z + b, a @ nu + b, a @ m @ a.T)
            np.testing.assert_allclose(lhs, rhs, atol=1e-8, rtol=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mahalanobis(np.zeros(3), np.zeros(2), PDMatrix(np.eye(2)))

    def test_batch(self):
        m = PDMatrix(np.eye(2))
        out = mahalanobis(np.array([[1.0, 0.0], [0.0, 2.0]]), np.zeros(2), m)
        np.testing.assert_allclose(out, [1.0, 2.0])


class TestNormalizedCov:
    def test_identity_fixed_point(self):
        np.testing.assert_array_equal(normalized_cov(np.eye(4)).entries, np.eye(4))

    def test_diag_example(self):
        np.testing.assert_allclose(
            normalized_cov(np.diag([4.0, 1.0])).entries, np.diag([1.6, 0.4]), atol=1e-14
        )

    def test_trace_is_dim(self):
        rng = np.random.default_rng(3)
        for d in (2, 3, 6):
            m = normalized_cov(random_pd(rng, d, scale=7.3))
            assert abs(np.trace(m.entries) - d) <= 1e-12

    def test_idempotent_up_to_rescaling(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            m = normalized_cov(random_pd(rng, 3))
            again = normalized_cov(m)
            np.testing.assert_allclose(again.entries, m.entries, atol=1e-12)


class TestCorrelationOf:
    def test_diagonal_becomes_identity(self):
        np.testing.assert_array_equal(
            correlation_of(np.diag([3.0, 0.5])).entries, np.eye(2)
        )

    def test_correlation_fixed_point(self):
        c = np.array([[1.0, 0.7], [0.7, 1.0]])
        np.testing.assert_allclose(correlation_of(c).entries, c, atol=1e-15)

    def test_entrywise_normalization(self):
        m = np.array([[4.0, 1.4], [1.4, 1.0]])
        np.testing.assert_allclose(
            correlation_of(m).entries, [[1.0, 0.7], [0.7, 1.0]], atol=1e-12
        )

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        m = random_pd(rng, 3)
        ref = correlation_of(m).entries
        for gamma in (0.1, 1.0, 10.0):
            scaled = correlation_of(gamma**2 * m).entries
            np.testing.assert_allclose(scaled, ref, rtol=0, atol=1e-15)

    def test_unit_diagonal_exact(self):
        rng = np.random.default_rng(6)
        c = correlation_of(random_pd(rng, 4)).entries
        np.testing.assert_array_equal(np.diag(c), np.ones(4))
