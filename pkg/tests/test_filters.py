"""Filter steps: exactness on linear systems, transport formulas, update."""

import numpy as np
import pytest
from scipy.linalg import expm as scipy_expm

from spkf.errors import SingularInnovation
from spkf.filters import (FILTER_NAMES, FILTER_STEPS, FilterConfig,
                          PredictedMoments, StateEstimate, ekf_step,
                          espukf_predict, kalman_update, resolve_kappa,
                          spukf_predict, ssukf_predict, ukf_predict)
from spkf.models import DynamicsModel, MeasurementModel
from spkf.numerics import rk4_propagate
from spkf.unscented import generate_sigma_points


def linear_problem(seed=0, n=3, m=2):
    """Stable linear dynamics and linear measurement with PD noises."""
    rng = np.random.default_rng(seed)
    a = 0.3 * rng.standard_normal((n, n))
    a -= (max(np.linalg.eigvals(a).real, default=0.0) + 0.4) * np.eye(n)
    q = 1e-4 * np.eye(n)
    dyn = DynamicsModel(n, lambda t, y: a @ y, q,
                        jacobian=lambda t, y: a,
                        jacobian_batch=lambda t, ys: np.broadcast_to(
                            a, (ys.shape[0], n, n)).copy())
    h = rng.standard_normal((m, n))
    r = np.eye(m) * 0.5
    meas = MeasurementModel(m, lambda y: h @ y, r,
                            h_jacobian=lambda y: h,
                            h_batch=lambda ys: ys @ h.T)
    return dyn, meas, a, h


def reentry_like():
    lam = 5e-5

    def deriv(t, y):
        return np.array([-y[1], -np.exp(-lam * y[0]) * y[1] ** 2 * y[2], 0.0])

    def jacobian(t, y):
        e = np.exp(-lam * y[0])
        return np.array([
            [0.0, -1.0, 0.0],
            [lam * e * y[1] ** 2 * y[2], -2 * e * y[1] * y[2], -e * y[1] ** 2],
            [0.0, 0.0, 0.0],
        ])

    return DynamicsModel(3, deriv, 1e-30 * np.eye(3), jacobian=jacobian)


class TestConfig:
    def test_kappa_heuristic(self):
        assert resolve_kappa(1, None) == 2.0
        assert resolve_kappa(3, None) == 0.0
        assert resolve_kappa(8, None) == 0.0
        assert resolve_kappa(3, 1.5) == 1.5

    def test_validation(self):
        with pytest.raises(ValueError):
            FilterConfig(substeps=0)
        with pytest.raises(ValueError):
            FilterConfig(simplex_w0=1.0)
        with pytest.raises(ValueError):
            FilterConfig(jacobian_mode="exact")


class TestLinearEquivalence:
    def test_all_filters_agree_on_linear_system(self):
        dyn, meas, _, _ = linear_problem(seed=4)
        rng = np.random.default_rng(9)
        est0 = StateEstimate(0.0, rng.standard_normal(3),
                             np.diag([0.5, 1.0, 0.25]))
        cfg = FilterConfig(kappa=0.5, substeps=1)
        dt = 0.1
        states = {name: StateEstimate(0.0, est0.mean.copy(), est0.cov.copy())
                  for name in FILTER_NAMES}
        for k in range(20):
            z = rng.standard_normal(2)
            for name in FILTER_NAMES:
                states[name] = FILTER_STEPS[name](dyn, meas, states[name], z,
                                                  dt, cfg)
            ref = states["ukf"]
            for name in FILTER_NAMES:
                assert np.allclose(states[name].mean, ref.mean,
                                   rtol=1e-9, atol=1e-9)
                assert np.allclose(states[name].cov, ref.cov,
                                   rtol=1e-9, atol=1e-9)


class TestPredictStages:
    def setup_method(self):
        self.dyn = reentry_like()
        self.meas = MeasurementModel(
            1, lambda y: np.array([y[0]]), np.array([[100.0]]),
            h_jacobian=lambda y: np.array([[1.0, 0.0, 0.0]]))
        self.est = StateEstimate(0.0, np.array([3e5, 2e4, 1e-3]),
                                 np.diag([1e6, 4e6, 1e-4]))
        self.cfg = FilterConfig(kappa=0.0, substeps=2)

    def test_ukf_moments_match_manual_transform(self):
        pred = ukf_predict(self.dyn, self.meas, self.est, 1.0, self.cfg)
        sigma = generate_sigma_points(self.est.mean, self.est.cov, 0.0)
        pts = np.array([rk4_propagate(self.dyn.deriv, p, 0.0, 1.0, 2)
                        for p in sigma.points])
        mean = sigma.weights @ pts
        dev = pts - mean
        cov = dev.T @ (dev * sigma.weights[:, None]) + self.dyn.process_noise_q
        assert np.allclose(pred.state_mean, mean, rtol=1e-12)
        assert np.allclose(pred.state_cov, cov, rtol=1e-12)
        assert pred.t == 1.0

    def test_sigma_point_filters_expose_propagated_set(self):
        for predict in (ukf_predict, ssukf_predict, spukf_predict,
                        espukf_predict):
            pred = predict(self.dyn, self.meas, self.est, 1.0, self.cfg)
            s = pred.sigma_points
            assert s is not None
            assert np.allclose(s.weights @ s.points, pred.state_mean,
                               rtol=1e-12)
            assert np.allclose(s.offsets, s.points - pred.state_mean,
                               rtol=1e-12, atol=1e-9)

    def test_spukf_transport_is_center_plus_rotated_offsets(self):
        pred = spukf_predict(self.dyn, self.meas, self.est, 1.0, self.cfg)
        sigma = generate_sigma_points(self.est.mean, self.est.cov, 0.0)
        center = rk4_propagate(self.dyn.deriv, self.est.mean, 0.0, 1.0, 2)
        phi = scipy_expm(self.dyn.jacobian(0.0, self.est.mean))
        pts = center + sigma.offsets @ phi.T
        mean = sigma.weights @ pts
        assert np.allclose(pred.state_mean, mean, rtol=1e-10)

    def test_espukf_literal_equals_simplified_formula(self):
        # the two-half extrapolation collapses algebraically to one
        # midpoint-matrix transport; float evaluation must agree to 1e-12
        pred = espukf_predict(self.dyn, self.meas, self.est, 1.0, self.cfg)
        sigma = generate_sigma_points(self.est.mean, self.est.cov, 0.0)
        center = rk4_propagate(self.dyn.deriv, self.est.mean, 0.0, 1.0, 2)
        pts = [center]
        for off in sigma.offsets[1:]:
            mid = self.est.mean + 0.5 * off
            phi_mid = scipy_expm(self.dyn.jacobian(0.0, mid))
            pts.append(center + phi_mid @ off)
        simplified = np.array(pts)
        mean = sigma.weights @ simplified
        scale = np.abs(pred.state_mean).max()
        assert np.allclose(pred.state_mean, mean, rtol=1e-12,
                           atol=1e-12 * scale)

    def test_ekf_uses_fd_when_h_jacobian_missing(self):
        meas = MeasurementModel(1, lambda y: np.array([y[0] ** 2 / 1e5]),
                                np.array([[100.0]]))
        out = ekf_step(self.dyn, meas, self.est,
                       np.array([9e5]), 1.0, self.cfg)
        assert np.isfinite(out.mean).all()


class TestKalmanUpdate:
    def test_scalar_and_vector_paths_agree(self):
        # duplicate a scalar problem into an uncorrelated 2-vector one;
        # the first state must update identically
        rng = np.random.default_rng(3)
        p = np.diag([2.0, 1.0])
        pred1 = PredictedMoments(1.0, np.array([1.0, 0.0]), p,
                                 np.array([0.5]), np.array([[3.0]]),
                                 np.array([[1.5], [0.0]]))
        z1 = np.array([1.1])
        out1 = kalman_update(pred1, z1)

        s2 = np.diag([3.0, 7.0])
        cross2 = np.array([[1.5, 0.0], [0.0, 0.0]])
        pred2 = PredictedMoments(1.0, np.array([1.0, 0.0]), p,
                                 np.array([0.5, 0.0]), s2, cross2)
        out2 = kalman_update(pred2, np.array([1.1, 0.0]))
        assert np.allclose(out1.mean, out2.mean, rtol=1e-12)
        assert np.allclose(out1.cov, out2.cov, rtol=1e-12)

    def test_matches_closed_form_scalar_gain(self):
        pred = PredictedMoments(0.0, np.array([2.0]), np.array([[4.0]]),
                                np.array([2.0]), np.array([[5.0]]),
                                np.array([[4.0]]))
        out = kalman_update(pred, np.array([3.0]))
        gain = 4.0 / 5.0
        assert np.isclose(out.mean[0], 2.0 + gain * 1.0)
        assert np.isclose(out.cov[0, 0], 4.0 - gain * 4.0)

    def test_singular_innovation_raises(self):
        pred = PredictedMoments(0.0, np.zeros(1), np.eye(1), np.zeros(1),
                                np.array([[0.0]]), np.zeros((1, 1)))
        with pytest.raises(SingularInnovation):
            kalman_update(pred, np.array([1.0]))
        bad = PredictedMoments(0.0, np.zeros(2), np.eye(2), np.zeros(2),
                               np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(SingularInnovation):
            kalman_update(bad, np.array([1.0, 1.0]))

    def test_posterior_covariance_shrinks_and_stays_symmetric(self):
        dyn, meas, _, _ = linear_problem(seed=8)
        est = StateEstimate(0.0, np.zeros(3), np.eye(3))
        cfg = FilterConfig(kappa=1.0)
        pred = ukf_predict(dyn, meas, est, 0.1, cfg)
        out = kalman_update(pred, np.array([0.2, -0.1]))
        assert np.allclose(out.cov, out.cov.T, atol=1e-14)
        assert (np.linalg.eigvalsh(pred.state_cov).min()
                >= np.linalg.eigvalsh(out.cov).min() > 0.0)


class TestEvaluationCounts:
    def make_counted(self, n):
        calls = [0]
        a = -0.1 * np.eye(n)

        def deriv(t, y):
            calls[0] += 1
            return a @ y

        dyn = DynamicsModel(n, deriv, 1e-6 * np.eye(n),
                            jacobian=lambda t, y: a,
                            jacobian_batch=lambda t, ys: np.broadcast_to(
                                a, (ys.shape[0], n, n)).copy())
        meas = MeasurementModel(1, lambda y: y[:1], np.eye(1),
                                h_jacobian=lambda y: np.eye(1, n),
                                h_batch=lambda ys: ys[:, :1])
        return dyn, meas, calls

    @pytest.mark.parametrize("n", [3, 8])
    @pytest.mark.parametrize("h", [1, 2, 4])
    def test_ukf_integrates_every_point(self, n, h):
        dyn, meas, calls = self.make_counted(n)
        est = StateEstimate(0.0, np.ones(n), np.eye(n))
        ukf_predict(dyn, meas, est, 1.0, FilterConfig(kappa=0.0, substeps=h))
        assert calls[0] == 4 * h * (2 * n + 1)

    @pytest.mark.parametrize("n", [3, 8])
    @pytest.mark.parametrize("h", [1, 2, 4])
    def test_spukf_integrates_only_the_mean(self, n, h):
        dyn, meas, calls = self.make_counted(n)
        est = StateEstimate(0.0, np.ones(n), np.eye(n))
        spukf_predict(dyn, meas, est, 1.0, FilterConfig(kappa=0.0, substeps=h))
        assert calls[0] == 4 * h
