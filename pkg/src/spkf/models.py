"""Continuous dynamics and measurement model containers."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import fd_jacobian, matrix_exp, rk4_propagate

__all__ = [
    "DynamicsModel",
    "MeasurementModel",
    "propagate_mean",
    "state_transition_matrix",
    "eval_jacobian",
    "eval_jacobian_stack",
]


def _check_noise(mat: np.ndarray, dim: int, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (dim, dim):
        raise ValueError(f"{name} must have shape {(dim, dim)}, got {mat.shape}")
    if np.abs(mat - mat.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(mat).max(initial=0.0)):
        raise ValueError(f"{name} must be symmetric")
    return mat


@dataclass
class DynamicsModel:
    """Continuous-time dynamics dy/dt = deriv(t, y).

    Attributes:
        state_dim: n.
        deriv: derivative function (t, y) -> (n,).
        process_noise_q: (n, n) symmetric PSD discrete process noise,
            added once per filter step.
        jacobian: optional analytic d(deriv)/dy, (t, y) -> (n, n).
        jacobian_batch: optional vectorized form mapping (t, (k, n)
            states) to the (k, n, n) Jacobian stack; must agree with
            jacobian row for row. Used where one step needs the Jacobian
            at many states.
    """

    state_dim: int
    deriv: Callable[[float, np.ndarray], np.ndarray]
    process_noise_q: np.ndarray
    jacobian: Callable[[float, np.ndarray], np.ndarray] | None = None
    jacobian_batch: Callable[[float, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.process_noise_q = _check_noise(
            self.process_noise_q, self.state_dim, "process_noise_q"
        )


@dataclass
class MeasurementModel:
    """Measurement z = h(y) + v with v ~ N(0, meas_noise_r).

    Attributes:
        meas_dim: m.
        h: measurement function y -> (m,).
        meas_noise_r: (m, m) symmetric PD noise covariance.
        h_jacobian: optional analytic dh/dy, y -> (m, n).
        h_batch: optional vectorized evaluator mapping a (k, n) stack of
            states to the (k, m) stack of h values; must agree with h
            row for row. Sigma-point code prefers it when present.
    """

    meas_dim: int
    h: Callable[[np.ndarray], np.ndarray]
    meas_noise_r: np.ndarray
    h_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    h_batch: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.meas_noise_r = _check_noise(self.meas_noise_r, self.meas_dim, "meas_noise_r")


def propagate_mean(dyn: DynamicsModel, y: np.ndarray, t: float, dt: float,
                   substeps: int = 1) -> np.ndarray:
    """Integrate the model derivative from t to t + dt."""
    return rk4_propagate(dyn.deriv, y, t, dt, substeps)


def eval_jacobian(dyn: DynamicsModel, t: float, y: np.ndarray,
                  mode: str = "analytic") -> np.ndarray:
    """Dynamics Jacobian at (t, y).

    mode "analytic" uses the model-supplied Jacobian when present and
    falls back to central differences; mode "fd" forces differences.
    """
    if mode == "analytic" and dyn.jacobian is not None:
        return dyn.jacobian(t, y)
    if mode not in ("analytic", "fd"):
        raise ValueError(f"unknown jacobian mode {mode!r}")
    return fd_jacobian(lambda yy: dyn.deriv(t, yy), y)


def eval_jacobian_stack(dyn: DynamicsModel, t: float, states: np.ndarray,
                        mode: str = "analytic") -> np.ndarray:
    """Dynamics Jacobian at every row of `states`, as a (k, n, n) stack.

    Takes the model's vectorized form when available, otherwise falls
    back to one eval_jacobian call per row.
    """
    if mode == "analytic" and dyn.jacobian_batch is not None:
        return np.asarray(dyn.jacobian_batch(t, states), dtype=float)
    return np.stack([eval_jacobian(dyn, t, y, mode) for y in states])


def state_transition_matrix(dyn: DynamicsModel, y: np.ndarray, t: float,
                            dt: float, mode: str = "analytic") -> np.ndarray:
    """First-order transition matrix exp(J dt) about the state y."""
    return matrix_exp(eval_jacobian(dyn, t, y, mode), dt)
