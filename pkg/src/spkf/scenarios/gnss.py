"""LEO satellite positioning from dual-constellation pseudoranges.

An 8-state estimation problem: ECI position and velocity of a low-Earth
orbiter plus one receiver clock bias per constellation. Truth dynamics
use a zonal-harmonic gravity model; measurements are pseudoranges to
every GPS and Galileo satellite above the elevation mask, simulated from
nominal circular Walker constellations. Satellite clock biases are held
constant per run and treated as known (broadcast) by the estimator, so
the receiver biases stay observable without extra states.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import NonConvergence, SingularGeometry
from ..filters import FilterConfig, StateEstimate
from ..models import DynamicsModel, MeasurementModel
from ..numerics import rk4_propagate
from .base import SimulatedRun

__all__ = [
    "C_LIGHT",
    "EARTH",
    "GravityField",
    "NavSatellite",
    "PseudorangeEntry",
    "PseudorangeSet",
    "LeoGnssConfig",
    "LeoGnssScenario",
    "zonal_potential",
    "zonal_gravity_accel",
    "build_constellations",
    "propagate_constellation",
    "pseudorange",
    "least_squares_fix",
]

C_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class GravityField:
    """Central body constants for the zonal-harmonic gravity model."""

    mu: float = 3.986004418e14
    radius: float = 6378137.0
    j2: float = 1.08263e-3
    j3: float = -2.532e-6
    j4: float = -1.61e-6


EARTH = GravityField()

# Legendre polynomials and derivatives in sin(latitude), degrees 2..4.
_LEGENDRE = (
    (2, lambda u: 1.5 * u * u - 0.5, lambda u: 3.0 * u),
    (3, lambda u: 2.5 * u**3 - 1.5 * u, lambda u: 7.5 * u * u - 1.5),
    (4, lambda u: (35.0 * u**4 - 30.0 * u * u + 3.0) / 8.0,
        lambda u: 17.5 * u**3 - 7.5 * u),
)


def zonal_potential(r_vec: np.ndarray, field: GravityField = EARTH) -> float:
    """Gravitational potential mu/r * (1 - sum J_l (re/r)^l P_l(sin lat)).

    Differentiating this scalar numerically is the reference oracle for
    zonal_gravity_accel.
    """
    x, y, z = np.asarray(r_vec, dtype=float)
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        raise ValueError("potential undefined at zero radius")
    u = z / r
    series = 1.0
    for l, p_l, _ in _LEGENDRE:
        j_l = (field.j2, field.j3, field.j4)[l - 2]
        series -= j_l * (field.radius / r) ** l * p_l(u)
    return field.mu / r * series


def zonal_gravity_accel(r_vec: np.ndarray, field: GravityField = EARTH) -> np.ndarray:
    """Two-body plus J2-J4 zonal acceleration at an ECI position."""
    r_vec = np.asarray(r_vec, dtype=float)
    x, y, z = r_vec
    r2 = x * x + y * y + z * z
    r = math.sqrt(r2)
    if r == 0.0:
        raise ValueError("acceleration undefined at zero radius")
    accel = (-field.mu / (r2 * r)) * r_vec
    u = z / r
    rhat = r_vec / r
    for l, p_l, dp_l in _LEGENDRE:
        j_l = (field.j2, field.j3, field.j4)[l - 2]
        k = field.mu * j_l * field.radius**l / r ** (l + 2)
        p, dp = p_l(u), dp_l(u)
        # Gradient of -mu J_l re^l P_l(u) / r^(l+1) split into the radial
        # and the latitude direction; only the z unit vector breaks the
        # radial symmetry.
        term = k * ((l + 1) * p + u * dp) * rhat
        term[2] -= k * dp
        accel += term
    return accel


def _two_body_gradient(r_vec: np.ndarray, mu: float) -> np.ndarray:
    r2 = float(r_vec @ r_vec)
    r = math.sqrt(r2)
    g = np.outer(r_vec, r_vec) * (3.0 / r2)
    g[0, 0] -= 1.0
    g[1, 1] -= 1.0
    g[2, 2] -= 1.0
    return g * (mu / (r2 * r))


@dataclass
class NavSatellite:
    """One navigation satellite on a circular orbit.

    arg_lat0 is the argument of latitude at t = 0; the clock bias is a
    constant offset known to the receiver from broadcast data.
    """

    sat_id: str
    constellation: str
    semi_major_axis: float
    inclination: float
    raan: float
    arg_lat0: float
    clock_bias: float = 0.0


@dataclass
class PseudorangeEntry:
    sat_id: str
    constellation: str
    pseudorange: float
    sat_pos: np.ndarray


@dataclass
class PseudorangeSet:
    """Pseudoranges of one epoch, corrected for satellite clock biases."""

    epoch: float
    entries: list


def build_constellations() -> list:
    """Nominal Walker sets: 24 GPS over 6 planes, 24 Galileo over 3."""
    sats = []
    for p in range(6):
        for s in range(4):
            sats.append(NavSatellite(
                f"G{4 * p + s + 1:02d}", "gps", 26_560_000.0,
                math.radians(55.0), math.radians(60.0 * p),
                math.radians(90.0 * s + 15.0 * p),
            ))
    for p in range(3):
        for s in range(8):
            sats.append(NavSatellite(
                f"E{8 * p + s + 1:02d}", "gal", 29_600_000.0,
                math.radians(56.0), math.radians(120.0 * p),
                math.radians(45.0 * s + 15.0 * p),
            ))
    return sats


def _circular_position(a, incl, raan, u):
    cu, su = np.cos(u), np.sin(u)
    ci, si = np.cos(incl), np.sin(incl)
    co, so = np.cos(raan), np.sin(raan)
    return np.stack([
        a * (co * cu - so * ci * su),
        a * (so * cu + co * ci * su),
        a * si * su,
    ], axis=-1)


def propagate_constellation(sats: list, t: float,
                            field: GravityField = EARTH) -> list:
    """Positions of circular-orbit satellites at time t, ECI."""
    out = []
    for sat in sats:
        n = math.sqrt(field.mu / sat.semi_major_axis**3)
        pos = _circular_position(sat.semi_major_axis, sat.inclination,
                                 sat.raan, sat.arg_lat0 + n * t)
        out.append((sat.sat_id, pos))
    return out


def pseudorange(leo_state: np.ndarray, sat: NavSatellite, sat_pos: np.ndarray,
                noise_sigma: float = 0.0, rng=None) -> float:
    """Measured range: geometry plus c times the clock-bias difference.

    The receiver bias is taken from state component 6 (GPS) or 7
    (Galileo) according to the satellite's constellation.
    """
    leo_state = np.asarray(leo_state, dtype=float)
    geom = float(np.linalg.norm(np.asarray(sat_pos, dtype=float) - leo_state[:3]))
    user_bias = leo_state[6] if sat.constellation == "gps" else leo_state[7]
    rho = geom + C_LIGHT * (user_bias - sat.clock_bias)
    if noise_sigma > 0.0:
        rho += noise_sigma * rng.standard_normal()
    return rho


def least_squares_fix(prs: PseudorangeSet):
    """Gauss-Newton position and per-constellation clock-bias fix.

    Unknowns are ECI position and both receiver biases (scaled to meters
    internally); convergence when the update norm drops below 1e-4 m.
    Entries must already be corrected for satellite clock biases.

    Returns:
        (position (3,), gps bias s, galileo bias s)

    Raises:
        SingularGeometry: normal-matrix condition above 1e12 (too few
            satellites, or a constellation's bias unobservable).
        NonConvergence: more than 20 iterations.
    """
    rho = np.array([e.pseudorange for e in prs.entries])
    sat_pos = np.array([e.sat_pos for e in prs.entries], dtype=float).reshape(-1, 3)
    is_gps = np.array([e.constellation == "gps" for e in prs.entries])

    x = np.zeros(5)
    jac = np.zeros((rho.size, 5))
    jac[:, 3] = is_gps
    jac[:, 4] = ~is_gps
    for _ in range(20):
        diff = sat_pos - x[:3]
        ranges = np.linalg.norm(diff, axis=1)
        predicted = ranges + np.where(is_gps, x[3], x[4])
        jac[:, :3] = -diff / ranges[:, None]
        normal = jac.T @ jac
        if np.linalg.cond(normal) > 1e12:
            raise SingularGeometry(
                f"{rho.size} usable pseudoranges give condition > 1e12"
            )
        step = np.linalg.solve(normal, jac.T @ (rho - predicted))
        x += step
        if float(np.linalg.norm(step)) < 1e-4:
            return x[:3].copy(), x[3] / C_LIGHT, x[4] / C_LIGHT
    raise NonConvergence("pseudorange fix did not converge in 20 iterations")


@dataclass
class LeoGnssConfig:
    """Scenario knobs; orbital elements in degrees for readability."""

    semi_major_axis: float = 6_778_137.0
    inclination_deg: float = 51.6
    raan_deg: float = 30.0
    arg_lat_deg: float = 0.0
    meas_sigma: float = 3.0
    elevation_mask_deg: float = 5.0
    clock_walk_std: float = 3e-9
    sat_clock_std: float = 1e-6
    init_pos_sigma: float = 10.0
    init_vel_sigma: float = 0.1
    init_clock_sigma: float = 1e-7
    process_pos_var: float = 1e-8
    process_vel_var: float = 1e-10
    dt: float = 1.0
    substeps: int = 2
    kappa: float = 0.0
    simplex_w0: float = 0.5
    duration: float = 300.0
    steady_state_start: float = 100.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LeoGnssConfig":
        return cls(**json.loads(text))


class LeoGnssScenario:
    """Builds the 8-state models and simulates seeded measurement runs."""

    name = "leo-gnss"
    state_dim = 8

    def __init__(self, config: LeoGnssConfig | None = None):
        self.config = config or LeoGnssConfig()
        self.sats = build_constellations()
        # Element arrays for vectorized geometry.
        self._a = np.array([s.semi_major_axis for s in self.sats])
        self._incl = np.array([s.inclination for s in self.sats])
        self._raan = np.array([s.raan for s in self.sats])
        self._u0 = np.array([s.arg_lat0 for s in self.sats])
        self._n = np.sqrt(EARTH.mu / self._a**3)
        self._is_gps = np.array([s.constellation == "gps" for s in self.sats])
        self._dynamics = self._build_dynamics()

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

    def _build_dynamics(self) -> DynamicsModel:
        cfg = self.config
        q = np.diag([cfg.process_pos_var] * 3 + [cfg.process_vel_var] * 3
                    + [cfg.clock_walk_std**2] * 2)
        mu = EARTH.mu

        def deriv(t, y):
            out = np.zeros(8)
            out[:3] = y[3:6]
            out[3:6] = zonal_gravity_accel(y[:3])
            return out

        # The zonal terms perturb the gradient at the 1e-3 level; the
        # two-body part alone is accurate enough for linearization.
        def jacobian(t, y):
            out = np.zeros((8, 8))
            out[0, 3] = out[1, 4] = out[2, 5] = 1.0
            out[3:6, :3] = _two_body_gradient(y[:3], mu)
            return out

        def jacobian_batch(t, ys):
            k = ys.shape[0]
            out = np.zeros((k, 8, 8))
            out[:, 0, 3] = out[:, 1, 4] = out[:, 2, 5] = 1.0
            r = ys[:, :3]
            r2 = (r * r).sum(axis=1)
            rn = np.sqrt(r2)
            g = r[:, :, None] * r[:, None, :] * (3.0 / r2)[:, None, None]
            g[:, 0, 0] -= 1.0
            g[:, 1, 1] -= 1.0
            g[:, 2, 2] -= 1.0
            out[:, 3:6, :3] = g * (mu / (r2 * rn))[:, None, None]
            return out

        return DynamicsModel(8, deriv, q, jacobian=jacobian,
                             jacobian_batch=jacobian_batch)

    def _positions(self, idx: np.ndarray, t) -> np.ndarray:
        """Satellite positions for index array idx at scalar or per-sat t."""
        u = self._u0[idx] + self._n[idx] * t
        return _circular_position(self._a[idx], self._incl[idx],
                                  self._raan[idx], u)

    def _epoch_geometry(self, t: float, r_leo: np.ndarray):
        """Visible-satellite transmit positions at receive time t.

        Returns (index array, transmit positions (m, 3)). Light-time is
        iterated twice, which settles the geometry to sub-millimeter.
        """
        all_idx = np.arange(len(self.sats))
        pos = self._positions(all_idx, t)
        diff = pos - r_leo
        dist = np.linalg.norm(diff, axis=1)
        sin_el = (diff @ r_leo) / (dist * np.linalg.norm(r_leo))
        visible = sin_el > math.sin(math.radians(self.config.elevation_mask_deg))
        idx = all_idx[visible]
        pos, dist = pos[visible], dist[visible]
        for _ in range(2):
            pos = self._positions(idx, t - dist / C_LIGHT)
            dist = np.linalg.norm(pos - r_leo, axis=1)
        return idx, pos

    def _epoch_measurement_model(self, sat_pos, gps_mask, sat_bias) -> MeasurementModel:
        m = sat_pos.shape[0]
        r = self.config.meas_sigma**2 * np.eye(m)
        bias_col = np.where(gps_mask, 6, 7)
        offset = C_LIGHT * sat_bias

        def h(y):
            ranges = np.linalg.norm(sat_pos - y[:3], axis=1)
            return ranges + C_LIGHT * y[bias_col] - offset

        def h_batch(states):
            diff = sat_pos[None, :, :] - states[:, None, :3]
            ranges = np.sqrt((diff * diff).sum(axis=2))
            return ranges + C_LIGHT * states[:, bias_col] - offset

        def h_jacobian(y):
            diff = sat_pos - y[:3]
            ranges = np.linalg.norm(diff, axis=1)
            jac = np.zeros((m, 8))
            jac[:, :3] = -diff / ranges[:, None]
            jac[gps_mask, 6] = C_LIGHT
            jac[~gps_mask, 7] = C_LIGHT
            return jac

        return MeasurementModel(m, h, r, h_jacobian=h_jacobian, h_batch=h_batch)

    def initial_truth(self) -> np.ndarray:
        cfg = self.config
        a = cfg.semi_major_axis
        incl = math.radians(cfg.inclination_deg)
        raan = math.radians(cfg.raan_deg)
        u = math.radians(cfg.arg_lat_deg)
        n = math.sqrt(EARTH.mu / a**3)
        pos = _circular_position(a, incl, raan, u)
        cu, su = math.cos(u), math.sin(u)
        ci, si = math.cos(incl), math.sin(incl)
        co, so = math.cos(raan), math.sin(raan)
        vel = a * n * np.array([
            -co * su - so * ci * cu,
            -so * su + co * ci * cu,
            si * cu,
        ])
        return np.concatenate([pos, vel, [0.0, 0.0]])

    def simulate(self, seed: int) -> SimulatedRun:
        """Truth orbit, clock walks, and per-epoch pseudorange bundles."""
        cfg = self.config
        rng = np.random.default_rng(seed)
        steps = int(round(cfg.duration / cfg.dt))
        sat_biases = cfg.sat_clock_std * rng.standard_normal(len(self.sats))

        times = np.arange(steps + 1) * cfg.dt
        states = np.empty((steps + 1, 8))
        states[0] = self.initial_truth()
        measurements, meas_models = [], []
        deriv = self._dynamics.deriv
        y = states[0]
        for k in range(steps):
            y = rk4_propagate(deriv, y, times[k], cfg.dt, cfg.substeps)
            y = y.copy()
            y[6:] += cfg.clock_walk_std * rng.standard_normal(2)
            states[k + 1] = y

            idx, sat_pos = self._epoch_geometry(times[k + 1], y[:3])
            gps_mask = self._is_gps[idx]
            biases = sat_biases[idx]
            geom = np.linalg.norm(sat_pos - y[:3], axis=1)
            user_bias = np.where(gps_mask, y[6], y[7])
            z = (geom + C_LIGHT * (user_bias - biases)
                 + cfg.meas_sigma * rng.standard_normal(idx.size))
            measurements.append(z)
            meas_models.append(
                self._epoch_measurement_model(sat_pos, gps_mask, biases)
            )

        scale = np.array([cfg.init_pos_sigma] * 3 + [cfg.init_vel_sigma] * 3
                         + [cfg.init_clock_sigma] * 2)
        mean = states[0] + scale * rng.standard_normal(8)
        initial = StateEstimate(0.0, mean, np.diag(scale**2))
        return SimulatedRun(times, states, measurements, meas_models, initial,
                            aux={"sat_biases": sat_biases})

    def pseudorange_set(self, leo_state: np.ndarray, t: float,
                        noise_sigma: float = 0.0, rng=None) -> PseudorangeSet:
        """Satellite-clock-corrected pseudoranges for a standalone fix."""
        leo_state = np.asarray(leo_state, dtype=float)
        idx, sat_pos = self._epoch_geometry(t, leo_state[:3])
        entries = []
        for i, pos in zip(idx, sat_pos):
            sat = self.sats[i]
            geom = float(np.linalg.norm(pos - leo_state[:3]))
            user_bias = leo_state[6] if sat.constellation == "gps" else leo_state[7]
            rho = geom + C_LIGHT * user_bias
            if noise_sigma > 0.0:
                rho += noise_sigma * rng.standard_normal()
            entries.append(PseudorangeEntry(sat.sat_id, sat.constellation,
                                            rho, pos))
        return PseudorangeSet(t, entries)

    def probe_setup(self):
        """Estimate, step and scale ladder for transport-order probes.

        The wide position covariance makes the gravity-gradient curvature
        dominate over the Jacobian's drift along the orbit, so the probe
        sees the transports' design orders instead of the shared O(dt^2)
        floor.
        """
        est = StateEstimate(
            0.0, self.initial_truth(),
            np.diag([1e12] * 3 + [1e2] * 3 + [1e-18] * 2),
        )
        return est, 1.0, [1.0, 0.7, 0.5, 0.35, 0.25]

    def error_vector(self, mean: np.ndarray, truth: np.ndarray) -> np.ndarray:
        return mean - truth

    def error_norm(self, mean: np.ndarray, truth: np.ndarray) -> float:
        """3-D position error, the scenario's headline metric."""
        return float(np.linalg.norm(mean[:3] - truth[:3]))
