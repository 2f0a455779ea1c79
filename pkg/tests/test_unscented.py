"""Sigma-point generation and moment recovery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spkf.unscented import (augment_state, generate_sigma_points,
                            generate_simplex_sigma_points, ut_covariance,
                            ut_cross_covariance, ut_mean)


def random_gaussian(seed, n):
    rng = np.random.default_rng(seed)
    mean = rng.standard_normal(n) * 3.0
    b = rng.standard_normal((n, n))
    cov = b @ b.T + n * np.eye(n)
    return mean, cov


class TestSymmetricSet:
    def test_shape_and_center(self):
        mean, cov = random_gaussian(0, 3)
        s = generate_sigma_points(mean, cov, kappa=0.5)
        assert s.points.shape == (7, 3)
        assert np.array_equal(s.points[0], mean)
        assert np.array_equal(s.offsets[0], np.zeros(3))
        assert np.allclose(s.points - mean, s.offsets)

    def test_weights_sum_to_one(self):
        for n, kappa in ((1, 2.0), (3, 0.0), (5, 0.5), (8, 0.0)):
            mean, cov = random_gaussian(n, n)
            s = generate_sigma_points(mean, cov, kappa)
            assert abs(s.weights.sum() - 1.0) < 1e-12

    def test_moments_recovered(self):
        mean, cov = random_gaussian(4, 4)
        s = generate_sigma_points(mean, cov, kappa=1.0)
        assert np.allclose(ut_mean(s.points, s.weights), mean, atol=1e-12)
        recovered = ut_covariance(s.points, s.weights, mean)
        assert np.allclose(recovered, cov, rtol=1e-10, atol=1e-10)

    def test_zero_kappa_zeroes_mean_weight(self):
        mean, cov = random_gaussian(2, 3)
        s = generate_sigma_points(mean, cov, kappa=0.0)
        assert s.weights[0] == 0.0
        assert np.allclose(ut_covariance(s.points, s.weights, mean), cov,
                           rtol=1e-10, atol=1e-10)

    def test_negative_total_spread_rejected(self):
        mean, cov = random_gaussian(1, 2)
        with pytest.raises(ValueError):
            generate_sigma_points(mean, cov, kappa=-2.0)

    def test_negative_kappa_warns(self):
        mean, cov = random_gaussian(1, 4)
        with pytest.warns(RuntimeWarning):
            generate_sigma_points(mean, cov, kappa=-0.5)

    @settings(deadline=None, max_examples=40)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 7),
           st.floats(0.0, 5.0))
    def test_reconstruction_property(self, seed, n, kappa):
        mean, cov = random_gaussian(seed, n)
        s = generate_sigma_points(mean, cov, kappa)
        assert abs(s.weights.sum() - 1.0) < 1e-12
        assert np.allclose(ut_mean(s.points, s.weights), mean,
                           rtol=1e-9, atol=1e-9)
        assert np.allclose(ut_covariance(s.points, s.weights, mean), cov,
                           rtol=1e-9, atol=1e-9 * abs(cov).max())


class TestSimplexSet:
    def test_shape_and_count(self):
        mean, cov = random_gaussian(9, 3)
        s = generate_simplex_sigma_points(mean, cov, w0=0.5)
        assert s.points.shape == (5, 3)
        assert s.kappa is None

    def test_weights_sum_to_one(self):
        for n, w0 in ((1, 0.0), (2, 0.25), (4, 0.5), (6, 0.9)):
            mean, cov = random_gaussian(n + 20, n)
            s = generate_simplex_sigma_points(mean, cov, w0)
            assert abs(s.weights.sum() - 1.0) < 1e-12

    def test_moments_recovered(self):
        for n in (1, 2, 3, 5, 8):
            mean, cov = random_gaussian(n, n)
            s = generate_simplex_sigma_points(mean, cov, w0=0.5)
            assert np.allclose(ut_mean(s.points, s.weights), mean,
                               rtol=1e-9, atol=1e-9)
            assert np.allclose(ut_covariance(s.points, s.weights, mean), cov,
                               rtol=1e-9, atol=1e-9 * abs(cov).max())

    def test_w0_validation(self):
        mean, cov = random_gaussian(0, 2)
        with pytest.raises(ValueError):
            generate_simplex_sigma_points(mean, cov, w0=1.0)
        with pytest.raises(ValueError):
            generate_simplex_sigma_points(mean, cov, w0=-0.1)


class TestMomentOps:
    def test_cross_covariance_matches_definition(self):
        mean, cov = random_gaussian(13, 3)
        s = generate_sigma_points(mean, cov, kappa=1.0)
        ys = s.points @ np.array([[1.0, 0.5, 0.0], [0.0, 2.0, 1.0]]).T
        y_mean = ut_mean(ys, s.weights)
        direct = sum(w * np.outer(p - mean, y - y_mean)
                     for w, p, y in zip(s.weights, s.points, ys))
        assert np.allclose(ut_cross_covariance(s.points, ys, s.weights,
                                               mean, y_mean),
                           direct, rtol=1e-12, atol=1e-12)

    def test_covariance_is_symmetric(self):
        mean, cov = random_gaussian(21, 5)
        s = generate_sigma_points(mean, cov, kappa=0.2)
        rec = ut_covariance(s.points, s.weights, mean)
        assert np.array_equal(rec, rec.T) or np.allclose(rec, rec.T, atol=1e-14)


class TestAugmentState:
    def test_block_layout(self):
        mean, cov = random_gaussian(2, 2)
        q = np.diag([0.1, 0.2, 0.3])
        am, ac = augment_state(mean, cov, q)
        assert am.shape == (5,)
        assert np.array_equal(am[:2], mean)
        assert np.array_equal(am[2:], np.zeros(3))
        assert np.array_equal(ac[:2, :2], cov)
        assert np.array_equal(ac[2:, 2:], q)
        assert np.array_equal(ac[:2, 2:], np.zeros((2, 3)))

    def test_cross_block(self):
        mean, cov = random_gaussian(3, 2)
        q = np.eye(1)
        cross = np.array([[0.5], [0.25]])
        _, ac = augment_state(mean, cov, q, cross)
        assert np.array_equal(ac[:2, 2:], cross)
        assert np.array_equal(ac[2:, :2], cross.T)

    def test_empty_noise_returns_copies(self):
        mean, cov = random_gaussian(4, 2)
        am, ac = augment_state(mean, cov, np.empty((0, 0)))
        assert np.array_equal(am, mean) and am is not mean
        assert np.array_equal(ac, cov) and ac is not cov

    def test_shape_validation(self):
        mean, cov = random_gaussian(5, 2)
        with pytest.raises(ValueError):
            augment_state(mean, np.eye(3), np.eye(1))
        with pytest.raises(ValueError):
            augment_state(mean, cov, np.ones((2, 1)))
        with pytest.raises(ValueError):
            augment_state(mean, cov, np.eye(2), cross=np.ones((3, 2)))
