"""Linear-algebra and integration primitives."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm as scipy_expm

from spkf.errors import IntegrationFailure, NotPositiveDefinite
from spkf.numerics import (cholesky_factor, fd_jacobian, matrix_exp,
                           matrix_exp_batch, rk4_propagate)


def random_spd(rng, n, scale=1.0):
    b = rng.standard_normal((n, n))
    return scale * (b @ b.T + n * np.eye(n))


class TestCholesky:
    def test_recomposes_spd_matrix(self):
        rng = np.random.default_rng(1)
        for n in (1, 2, 3, 4, 5, 8):
            p = random_spd(rng, n)
            low = cholesky_factor(p)
            assert np.allclose(low @ low.T, p, rtol=1e-12, atol=1e-12)
            assert np.allclose(np.triu(low, 1), 0.0)

    def test_scale_multiplies_before_factoring(self):
        p = np.diag([4.0, 9.0])
        low = cholesky_factor(p, scale=0.25)
        assert np.allclose(low @ low.T, 0.25 * p)

    def test_semidefinite_input_yields_zero_column(self):
        # rank-1 PSD: one pivot collapses, factor must still recompose
        v = np.array([1.0, 2.0, -1.0])
        p = np.outer(v, v)
        low = cholesky_factor(p)
        assert np.allclose(low @ low.T, p, atol=1e-12)
        assert (np.diag(low) == 0.0).sum() == 2

    def test_indefinite_matrix_rejected(self):
        p = np.diag([1.0, -1.0, 1.0])
        with pytest.raises(NotPositiveDefinite):
            cholesky_factor(p)

    def test_asymmetric_matrix_rejected(self):
        p = np.array([[1.0, 0.5], [0.1, 1.0]])
        with pytest.raises(ValueError):
            cholesky_factor(p)

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError):
            cholesky_factor(np.ones((2, 3)))

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(ValueError):
            cholesky_factor(np.eye(2), scale=0.0)

    @settings(deadline=None, max_examples=40)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 7))
    def test_recomposition_property(self, seed, n):
        rng = np.random.default_rng(seed)
        p = random_spd(rng, n, scale=10.0 ** rng.integers(-3, 4))
        low = cholesky_factor(p)
        assert np.allclose(low @ low.T, p, rtol=1e-10, atol=1e-10 * abs(p).max())

    def test_small_path_matches_lapack(self):
        rng = np.random.default_rng(7)
        for n in (2, 3, 4):
            p = random_spd(rng, n)
            assert np.allclose(cholesky_factor(p), np.linalg.cholesky(p),
                               rtol=1e-12, atol=1e-12)


class TestMatrixExp:
    def test_zero_time_is_identity(self):
        a = np.random.default_rng(0).standard_normal((4, 4))
        assert np.array_equal(matrix_exp(a, 0.0), np.eye(4))

    def test_matches_series_for_small_matrix(self):
        a = np.array([[0.0, 1.0], [-1.0, 0.0]])
        # exp of a rotation generator
        t = 0.7
        expected = np.array([[math.cos(t), math.sin(t)],
                             [-math.sin(t), math.cos(t)]])
        assert np.allclose(matrix_exp(a, t), expected, atol=1e-14)

    def test_semigroup_property(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.standard_normal((4, 4))
            s, t = rng.uniform(0.1, 2.0, size=2)
            whole = matrix_exp(a, s + t)
            split = matrix_exp(a, s) @ matrix_exp(a, t)
            assert np.allclose(whole, split,
                               rtol=1e-11, atol=1e-11 * abs(whole).max())

    def test_rejects_nonsquare_and_nonfinite(self):
        with pytest.raises(ValueError):
            matrix_exp(np.ones((2, 3)))
        with pytest.raises(ValueError):
            matrix_exp(np.array([[np.nan, 0.0], [0.0, 0.0]]))


class TestMatrixExpBatch:
    def test_matches_single_over_magnitudes(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for n in (2, 3, 5, 8):
            for scale in (1e-6, 1e-2, 1.0, 10.0, 300.0):
                a = scale * rng.standard_normal((6, n, n))
                out = matrix_exp_batch(a)
                for i in range(a.shape[0]):
                    ref = scipy_expm(a[i])
                    err = abs(out[i] - ref).max() / max(1.0, abs(ref).max())
                    worst = max(worst, err)
        assert worst < 1e-10

    def test_badly_graded_stack(self):
        # mixed-unit Jacobians: entries spanning many decades
        a = np.array([
            [[0.0, 1.0, 0.0], [1e-5, -2e-1, -4e8], [0.0, 0.0, 0.0]],
            [[0.0, -1.0, 0.0], [2e-5, -1e-1, 3e8], [0.0, 0.0, 0.0]],
        ])
        out = matrix_exp_batch(a, 0.5)
        for i in range(2):
            ref = scipy_expm(0.5 * a[i])
            assert np.allclose(out[i], ref, rtol=1e-9, atol=1e-9 * abs(ref).max())

    def test_time_scaling_matches(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((4, 3, 3))
        assert np.allclose(matrix_exp_batch(a, 0.25),
                           matrix_exp_batch(0.25 * a), rtol=1e-12, atol=1e-12)

    def test_zero_time_identity_stack(self):
        a = np.random.default_rng(1).standard_normal((3, 4, 4))
        out = matrix_exp_batch(a, 0.0)
        assert np.array_equal(out, np.broadcast_to(np.eye(4), (3, 4, 4)))

    def test_empty_stack(self):
        out = matrix_exp_batch(np.empty((0, 3, 3)))
        assert out.shape == (0, 3, 3)

    def test_rejects_bad_shape_and_nonfinite(self):
        with pytest.raises(ValueError):
            matrix_exp_batch(np.ones((2, 2)))
        bad = np.zeros((2, 2, 2))
        bad[1, 0, 1] = np.inf
        with pytest.raises(ValueError):
            matrix_exp_batch(bad)


class TestRk4:
    def test_exact_on_cubic_integrand(self):
        # quadrature of t^3 is exact for classical RK4
        out = rk4_propagate(lambda t, y: np.array([t ** 3]),
                            np.array([0.0]), 0.0, 2.0, 1)
        assert np.allclose(out, [4.0], rtol=1e-14)

    def test_linear_system_close_to_exponential(self):
        a = np.array([[0.0, 1.0], [-2.0, -0.5]])
        y0 = np.array([1.0, 0.0])
        out = rk4_propagate(lambda t, y: a @ y, y0, 0.0, 0.1, 1)
        assert np.allclose(out, scipy_expm(0.1 * a) @ y0, atol=1e-9)

    def test_observed_order_is_four(self):
        def deriv(t, y):
            return np.array([math.sin(y[0]) + math.cos(2.0 * t)])

        y0 = np.array([0.3])
        ref = rk4_propagate(deriv, y0, 0.0, 1.0, 256)
        e2 = abs(rk4_propagate(deriv, y0, 0.0, 1.0, 2)[0] - ref[0])
        e4 = abs(rk4_propagate(deriv, y0, 0.0, 1.0, 4)[0] - ref[0])
        order = math.log2(e2 / e4)
        assert 3.7 <= order <= 4.3

    def test_evaluation_count_is_four_per_substep(self):
        calls = []

        def deriv(t, y):
            calls.append(t)
            return -y

        for substeps in (1, 2, 5):
            calls.clear()
            rk4_propagate(deriv, np.array([1.0]), 0.0, 1.0, substeps)
            assert len(calls) == 4 * substeps

    def test_substep_validation(self):
        with pytest.raises(ValueError):
            rk4_propagate(lambda t, y: -y, np.array([1.0]), 0.0, 1.0, 0)

    def test_nonfinite_derivative_reports_time(self):
        def deriv(t, y):
            return np.array([np.nan]) if t > 0.4 else -y

        with pytest.raises(IntegrationFailure) as info:
            rk4_propagate(deriv, np.array([1.0]), 0.0, 1.0, 1)
        assert info.value.time >= 0.4


class TestFdJacobian:
    def test_matches_analytic_jacobian(self):
        def func(y):
            return np.array([y[0] * y[1], math.sin(y[0]), y[1] ** 2])

        y = np.array([0.8, -1.2])
        expected = np.array([[y[1], y[0]],
                             [math.cos(y[0]), 0.0],
                             [0.0, 2.0 * y[1]]])
        assert np.allclose(fd_jacobian(func, y), expected, atol=1e-8)

    def test_step_validation(self):
        with pytest.raises(ValueError):
            fd_jacobian(lambda y: y, np.array([1.0]), step=0.0)

    def test_nonfinite_evaluation_names_component(self):
        def func(y):
            # negative y[1] probes go NaN; y[0] probes stay finite
            return np.sqrt(np.array([y[1]]))

        with np.errstate(invalid="ignore"):
            with pytest.raises(ValueError, match="component 1"):
                fd_jacobian(func, np.array([1.0, 0.0]))
