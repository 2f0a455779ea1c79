"""Vertically falling body tracked by ground radar.

A body re-enters along a vertical line: altitude x1 (ft), downward speed
x2 (ft/s) and a constant ballistic coefficient x3 that the filter must
infer from the drag it causes. A radar sits at altitude H, horizontal
offset M from the fall line, and measures slant range. The body falls
ballistically until it hits dense atmosphere, decelerates at tens of g,
then creeps down; the deceleration phase is where linearization breaks
down and the filters separate.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..filters import FilterConfig, StateEstimate
from ..models import DynamicsModel, MeasurementModel
from ..numerics import rk4_propagate
from .base import SimulatedRun

__all__ = ["ReentryConfig", "ReentryScenario", "radar_range"]


@dataclass
class ReentryConfig:
    """Benchmark constants (units: ft, s)."""

    drag_decay: float = 5e-5
    radar_altitude: float = 1e5
    radar_offset: float = 1e5
    true_initial: tuple = (3e5, 2e4, 1e-3)
    init_mean: tuple = (3e5, 2e4, 3e-5)
    init_cov_diag: tuple = (1e6, 4e6, 1e-4)
    process_noise_diag: tuple = (1e-30, 1e-30, 1e-30)
    meas_variance: float = 1e4
    dt: float = 1.0
    substeps: int = 2
    kappa: float = 0.0
    simplex_w0: float = 0.5
    duration: float = 1000.0
    steady_state_start: float = 200.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ReentryConfig":
        raw = json.loads(text)
        for key in ("true_initial", "init_mean", "init_cov_diag", "process_noise_diag"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


def radar_range(state: np.ndarray, cfg: ReentryConfig) -> float:
    """Slant range from the radar to the body."""
    dx = state[0] - cfg.radar_altitude
    return math.sqrt(cfg.radar_offset * cfg.radar_offset + dx * dx)


class ReentryScenario:
    """Builds models, simulates seeded truth runs, scores estimates."""

    name = "reentry"
    state_dim = 3

    def __init__(self, config: ReentryConfig | None = None):
        self.config = config or ReentryConfig()
        self._dynamics = self._build_dynamics()
        self._measurement = self._build_measurement()

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def steady_state_start(self) -> float:
        return self.config.steady_state_start

    def filter_config(self) -> FilterConfig:
        cfg = self.config
        return FilterConfig(kappa=cfg.kappa, substeps=cfg.substeps,
                            simplex_w0=cfg.simplex_w0)

    def dynamics(self) -> DynamicsModel:
        return self._dynamics

    def measurement(self) -> MeasurementModel:
        return self._measurement

    def _build_dynamics(self) -> DynamicsModel:
        lam = self.config.drag_decay
        q = np.diag(self.config.process_noise_diag)

        def deriv(t, y):
            x1, x2, x3 = y
            drag = np.exp(-lam * x1) * x2 * x2 * x3
            return np.array([-x2, -drag, 0.0])

        def jacobian(t, y):
            x1, x2, x3 = y.tolist()
            e = math.exp(-lam * x1)
            return np.array([
                [0.0, -1.0, 0.0],
                [lam * e * x2 * x2 * x3, -2.0 * e * x2 * x3, -e * x2 * x2],
                [0.0, 0.0, 0.0],
            ])

        def jacobian_batch(t, ys):
            ex2 = np.exp(-lam * ys[:, 0]) * ys[:, 1]
            ex2v = ex2 * ys[:, 1]
            # Built (row, col, member) so each assignment below is one
            # contiguous slab; moveaxis hands back the (k, 3, 3) view.
            out = np.zeros((3, 3, ys.shape[0]))
            out[0, 1] = -1.0
            out[1, 0] = lam * ex2v * ys[:, 2]
            out[1, 1] = -2.0 * ex2 * ys[:, 2]
            out[1, 2] = -ex2v
            return np.moveaxis(out, 2, 0)

        return DynamicsModel(3, deriv, q, jacobian=jacobian,
                             jacobian_batch=jacobian_batch)

    def _build_measurement(self) -> MeasurementModel:
        cfg = self.config
        h_alt, offset = cfg.radar_altitude, cfg.radar_offset
        m2 = offset * offset
        r = np.array([[cfg.meas_variance]])

        def h(y):
            dx = y[0] - h_alt
            return np.array([math.sqrt(m2 + dx * dx)])

        def h_jacobian(y):
            dx = y[0] - h_alt
            rng = math.sqrt(m2 + dx * dx)
            return np.array([[dx / rng, 0.0, 0.0]])

        def h_batch(states):
            dx = states[:, :1] - h_alt
            dx *= dx
            dx += m2
            return np.sqrt(dx, out=dx)

        return MeasurementModel(1, h, r, h_jacobian=h_jacobian, h_batch=h_batch)

    def simulate(self, seed: int) -> SimulatedRun:
        """Truth trajectory plus noisy range measurements for one seed."""
        cfg = self.config
        rng = np.random.default_rng(seed)
        steps = int(round(cfg.duration / cfg.dt))
        noise_std = np.sqrt(np.asarray(cfg.process_noise_diag))
        meas_std = math.sqrt(cfg.meas_variance)

        times = np.arange(steps + 1) * cfg.dt
        states = np.empty((steps + 1, 3))
        states[0] = cfg.true_initial
        measurements = []
        deriv = self._dynamics.deriv
        y = states[0]
        for k in range(steps):
            y = rk4_propagate(deriv, y, times[k], cfg.dt, cfg.substeps)
            y = y + noise_std * rng.standard_normal(3)
            states[k + 1] = y
            z = radar_range(y, cfg) + meas_std * rng.standard_normal()
            measurements.append(np.array([z]))

        initial = StateEstimate(0.0, np.array(cfg.init_mean, dtype=float),
                                np.diag(cfg.init_cov_diag))
        return SimulatedRun(times, states, measurements,
                            [self._measurement] * steps, initial)

    def probe_setup(self):
        """Estimate, step and scale ladder for transport-order probes.

        The covariance widens the altitude axis so the drag exponential,
        not the linear-in-x3 coupling, dominates the transport error; the
        short step keeps the frozen-Jacobian term from drowning it.
        """
        est = StateEstimate(0.0, np.array(self.config.init_mean, dtype=float),
                            np.diag([1e8, 1e2, 1e-10]))
        return est, 1e-3, [1.0, 0.7, 0.5, 0.35, 0.25]

    def error_vector(self, mean: np.ndarray, truth: np.ndarray) -> np.ndarray:
        return mean - truth

    def error_norm(self, mean: np.ndarray, truth: np.ndarray) -> float:
        """Absolute altitude error, the benchmark's headline metric."""
        return abs(mean[0] - truth[0])
