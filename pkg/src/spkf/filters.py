"""Five nonlinear filters over a shared predict/update structure.

ekf      linearized propagation and update
ukf      symmetric sigma set, every point integrated
ssukf    spherical-simplex sigma set, every point integrated
spukf    one integration; remaining points rebuilt through exp(J dt)
espukf   like spukf plus Richardson extrapolation with midpoint
         transition matrices, trading extra exponentials for accuracy

All share kalman_update, so accuracy differences between them come from
the prediction stage alone.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import SingularInnovation
from .models import (DynamicsModel, MeasurementModel, eval_jacobian_stack,
                     propagate_mean, state_transition_matrix)
from .numerics import fd_jacobian, matrix_exp_batch, rk4_propagate
from .unscented import (SigmaPointSet, generate_sigma_points,
                        generate_simplex_sigma_points)

__all__ = [
    "StateEstimate",
    "FilterConfig",
    "PredictedMoments",
    "resolve_kappa",
    "ekf_step",
    "ukf_predict",
    "ssukf_predict",
    "spukf_predict",
    "espukf_predict",
    "kalman_update",
    "ukf_step",
    "ssukf_step",
    "spukf_step",
    "espukf_step",
    "FILTER_STEPS",
    "FILTER_NAMES",
]


@dataclass
class StateEstimate:
    """Gaussian state belief at time t."""

    t: float
    mean: np.ndarray
    cov: np.ndarray


@dataclass
class FilterConfig:
    """Knobs shared by all filter steps.

    Attributes:
        kappa: sigma-point spread; None picks max(0, 3 - n), the usual
            n + kappa = 3 heuristic floored at zero so weights stay
            nonnegative for large states.
        substeps: RK4 substeps per filter interval (h in the cost model).
        simplex_w0: mean-point weight of the simplex set.
        jacobian_mode: "analytic" or "fd", forwarded to eval_jacobian.
    """

    kappa: float | None = None
    substeps: int = 1
    simplex_w0: float = 0.5
    jacobian_mode: str = "analytic"

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if not (0.0 <= self.simplex_w0 < 1.0):
            raise ValueError(f"simplex_w0 must lie in [0, 1), got {self.simplex_w0!r}")
        if self.jacobian_mode not in ("analytic", "fd"):
            raise ValueError(f"unknown jacobian mode {self.jacobian_mode!r}")


@dataclass
class PredictedMoments:
    """Prior moments handed from a predict stage to kalman_update.

    sigma_points carries the propagated set for the sigma-point filters
    (offsets are deviations about the predicted mean); the EKF leaves it
    None.
    """

    t: float
    state_mean: np.ndarray
    state_cov: np.ndarray
    meas_mean: np.ndarray
    innovation_cov: np.ndarray
    cross_cov: np.ndarray
    sigma_points: SigmaPointSet | None = None


def resolve_kappa(n: int, kappa: float | None) -> float:
    return float(kappa) if kappa is not None else max(0.0, 3.0 - n)


def _assemble(t, dyn, meas, points, weights, kappa) -> PredictedMoments:
    state_mean = weights @ points
    dev = points - state_mean
    wdev = dev * weights[:, None]
    state_cov = dev.T @ wdev + dyn.process_noise_q
    if kappa is not None and kappa < 0.0:
        # Negative mean weight can push the predicted covariance
        # indefinite; generate_sigma_points already warned about it.
        state_cov = 0.5 * (state_cov + state_cov.T)
    if meas.h_batch is not None:
        meas_points = np.asarray(meas.h_batch(points), dtype=float)
    else:
        meas_points = np.array([meas.h(p) for p in points])
    meas_mean = weights @ meas_points
    dz = meas_points - meas_mean
    if meas_points.shape[1] == 1:
        # Scalar measurement: the quadratic form collapses to a weighted
        # sum of squares.
        col = dz[:, 0]
        s = np.array([[(weights * col) @ col + meas.meas_noise_r[0, 0]]])
    else:
        s = dz.T @ (dz * weights[:, None]) + meas.meas_noise_r
    # The weighted state deviations serve both the state covariance above
    # and the cross covariance here.
    p_yz = wdev.T @ dz
    propagated = SigmaPointSet(points, weights, dev, kappa)
    return PredictedMoments(t, state_mean, state_cov, meas_mean, s, p_yz,
                            propagated)


def ukf_predict(dyn: DynamicsModel, meas: MeasurementModel,
                est: StateEstimate, dt: float,
                cfg: FilterConfig) -> PredictedMoments:
    """Integrate all 2n+1 sigma points, then recover moments."""
    kappa = resolve_kappa(est.mean.size, cfg.kappa)
    sigma = generate_sigma_points(est.mean, est.cov, kappa)
    deriv, t, h = dyn.deriv, est.t, cfg.substeps
    points = np.array([rk4_propagate(deriv, p, t, dt, h) for p in sigma.points])
    return _assemble(t + dt, dyn, meas, points, sigma.weights, kappa)


def ssukf_predict(dyn: DynamicsModel, meas: MeasurementModel,
                  est: StateEstimate, dt: float,
                  cfg: FilterConfig) -> PredictedMoments:
    """Integrate the n+2 simplex points, then recover moments."""
    sigma = generate_simplex_sigma_points(est.mean, est.cov, cfg.simplex_w0)
    deriv, t, h = dyn.deriv, est.t, cfg.substeps
    points = np.array([rk4_propagate(deriv, p, t, dt, h) for p in sigma.points])
    return _assemble(t + dt, dyn, meas, points, sigma.weights, None)


def _spukf_points(dyn, est, dt, cfg, sigma) -> np.ndarray:
    """Integrate only the mean; move the offsets with one exp(J dt)."""
    center = rk4_propagate(dyn.deriv, est.mean, est.t, dt, cfg.substeps)
    phi = state_transition_matrix(dyn, est.mean, est.t, dt, cfg.jacobian_mode)
    return center + sigma.offsets @ phi.T


def _espukf_points(dyn, est, dt, cfg, sigma) -> np.ndarray:
    """Extrapolated transport: each offset rebuilt whole (N1) and in two
    halves with a midpoint transition matrix (N2); 2*N2 - N1 cancels the
    quadratic error term."""
    t, mode = est.t, cfg.jacobian_mode
    center = rk4_propagate(dyn.deriv, est.mean, t, dt, cfg.substeps)

    offsets = sigma.offsets[1:]
    half = 0.5 * offsets
    # One stack holds the 2n+1 exponentials: the mean-point matrix first,
    # then one midpoint matrix per offset.
    at = np.empty_like(sigma.points)
    at[0] = est.mean
    np.add(est.mean, half, out=at[1:])
    phis = matrix_exp_batch(eval_jacobian_stack(dyn, t, at, mode), dt)

    base = offsets @ phis[0].T
    n1 = center + base
    n2 = center + 0.5 * base + (phis[1:] @ half[:, :, None])[:, :, 0]
    points = np.empty_like(sigma.points)
    points[0] = center
    np.subtract(2.0 * n2, n1, out=points[1:])
    return points


def spukf_predict(dyn: DynamicsModel, meas: MeasurementModel,
                  est: StateEstimate, dt: float,
                  cfg: FilterConfig) -> PredictedMoments:
    """One integration plus first-order offset transport.

    The rebuilt points carry an O(|offset|^2) error relative to
    integrating each point.
    """
    kappa = resolve_kappa(est.mean.size, cfg.kappa)
    sigma = generate_sigma_points(est.mean, est.cov, kappa)
    points = _spukf_points(dyn, est, dt, cfg, sigma)
    return _assemble(est.t + dt, dyn, meas, points, sigma.weights, kappa)


def espukf_predict(dyn: DynamicsModel, meas: MeasurementModel,
                   est: StateEstimate, dt: float,
                   cfg: FilterConfig) -> PredictedMoments:
    """spukf_predict plus Richardson extrapolation per sigma point.

    Trades one extra matrix exponential per offset for an O(|offset|^3)
    transport error.
    """
    kappa = resolve_kappa(est.mean.size, cfg.kappa)
    sigma = generate_sigma_points(est.mean, est.cov, kappa)
    points = _espukf_points(dyn, est, dt, cfg, sigma)
    return _assemble(est.t + dt, dyn, meas, points, sigma.weights, kappa)


def kalman_update(pred: PredictedMoments, z: np.ndarray,
                  r: np.ndarray | None = None) -> StateEstimate:
    """Linear minimum-variance update from predicted moments.

    The innovation covariance in `pred` already contains the measurement
    noise, so `r` is accepted only for call-site symmetry with the
    predict signatures and is not re-added.

    Raises:
        SingularInnovation: the innovation covariance is not positive
            definite.
    """
    s = pred.innovation_cov
    if s.shape[0] == 1:
        # Scalar innovation: the Cholesky solve collapses to a division.
        s00 = float(s[0, 0])
        if not s00 > 0.0:
            raise SingularInnovation(f"scalar innovation variance {s00!r}")
        gain = pred.cross_cov[:, 0] / s00
        mean = pred.state_mean + (float(z[0]) - float(pred.meas_mean[0])) * gain
        # Subtracting the exactly symmetric rank-1 term keeps whatever
        # symmetry the prediction had, so no resymmetrization here.
        cov = pred.state_cov - s00 * (gain[:, None] * gain)
    else:
        try:
            low = np.linalg.cholesky(s)
        except np.linalg.LinAlgError as exc:
            raise SingularInnovation(str(exc)) from None
        # K = P_yz S^-1 through two triangular solves; S is never inverted.
        half = solve_triangular(low, pred.cross_cov.T, lower=True, check_finite=False)
        gain = solve_triangular(low.T, half, lower=False, check_finite=False).T
        mean = pred.state_mean + gain @ (z - pred.meas_mean)
        cov = pred.state_cov - gain @ s @ gain.T
        cov = 0.5 * (cov + cov.T)
    return StateEstimate(pred.t, mean, cov)


def ekf_step(dyn: DynamicsModel, meas: MeasurementModel, est: StateEstimate,
             z: np.ndarray, dt: float, cfg: FilterConfig) -> StateEstimate:
    """Classic extended Kalman filter step (predict + update)."""
    mean = propagate_mean(dyn, est.mean, est.t, dt, cfg.substeps)
    phi = state_transition_matrix(dyn, est.mean, est.t, dt, cfg.jacobian_mode)
    cov = phi @ est.cov @ phi.T + dyn.process_noise_q
    cov = 0.5 * (cov + cov.T)
    if cfg.jacobian_mode == "analytic" and meas.h_jacobian is not None:
        h_jac = meas.h_jacobian(mean)
    else:
        h_jac = fd_jacobian(meas.h, mean)
    s = h_jac @ cov @ h_jac.T + meas.meas_noise_r
    pred = PredictedMoments(est.t + dt, mean, cov, meas.h(mean), s, cov @ h_jac.T)
    return kalman_update(pred, z, meas.meas_noise_r)


def ukf_step(dyn, meas, est, z, dt, cfg):
    return kalman_update(ukf_predict(dyn, meas, est, dt, cfg), z, meas.meas_noise_r)


def ssukf_step(dyn, meas, est, z, dt, cfg):
    return kalman_update(ssukf_predict(dyn, meas, est, dt, cfg), z, meas.meas_noise_r)


def spukf_step(dyn, meas, est, z, dt, cfg):
    return kalman_update(spukf_predict(dyn, meas, est, dt, cfg), z, meas.meas_noise_r)


def espukf_step(dyn, meas, est, z, dt, cfg):
    return kalman_update(espukf_predict(dyn, meas, est, dt, cfg), z, meas.meas_noise_r)

FILTER_STEPS = {
    "ekf": ekf_step,
    "ukf": ukf_step,
    "ssukf": ssukf_step,
    "spukf": spukf_step,
    "espukf": espukf_step,
}
FILTER_NAMES = tuple(FILTER_STEPS)
