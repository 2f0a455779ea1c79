"""Fidelity measurement for the fast sigma-point transports.

Runs the exact propagation (every sigma point integrated) and the
approximate one (offsets rebuilt through transition matrices) from
identical inputs, and reports where they disagree: per-point errors,
their weighted mean, and the gap between the two predicted covariances.
Scaling the prior covariance and watching the worst error shrink gives
an empirical order of accuracy without ever forming a Hessian.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ExactRegime
from .filters import FilterConfig, StateEstimate, _espukf_points, _spukf_points, resolve_kappa
from .models import DynamicsModel
from .numerics import rk4_propagate
from .unscented import generate_sigma_points, ut_covariance, ut_mean

__all__ = [
    "FidelityReport",
    "OrderProbeResult",
    "compare_sigma_propagation",
    "order_probe",
]

_TRANSPORTS = {"spukf": _spukf_points, "espukf": _espukf_points}


@dataclass
class FidelityReport:
    """One exact-vs-approximate comparison at a fixed prior spread.

    Attributes:
        per_point_errors: exact minus rebuilt point, one vector per
            sigma point.
        mean_error: weight-combined per-point errors; equals the gap
            between the exactly and approximately predicted means.
        cov_error_norm: Frobenius norm of the difference of the two
            predicted covariances.
        delta_y_scale: largest initial offset norm, the natural abscissa
            for order-of-accuracy fits.
    """

    per_point_errors: list
    mean_error: np.ndarray
    cov_error_norm: float
    delta_y_scale: float


@dataclass
class OrderProbeResult:
    """Worst-case transport error as a function of prior spread."""

    points: list
    slope: float


def compare_sigma_propagation(dyn: DynamicsModel, est: StateEstimate,
                              dt: float, cfg: FilterConfig,
                              method: str) -> FidelityReport:
    """Measure how far a fast transport strays from full integration.

    Both propagations start from the same symmetric sigma set, so the
    mean point is shared and its error is identically zero.
    """
    try:
        transport = _TRANSPORTS[method]
    except KeyError:
        raise ValueError(f"unknown transport method {method!r}") from None
    kappa = resolve_kappa(est.mean.size, cfg.kappa)
    sigma = generate_sigma_points(est.mean, est.cov, kappa)
    exact = np.array([
        rk4_propagate(dyn.deriv, p, est.t, dt, cfg.substeps)
        for p in sigma.points
    ])
    approx = transport(dyn, est, dt, cfg, sigma)

    errors = exact - approx
    mean_error = sigma.weights @ errors
    # Process noise is added to both predicted covariances and cancels
    # in their difference.
    cov_exact = ut_covariance(exact, sigma.weights, ut_mean(exact, sigma.weights))
    cov_approx = ut_covariance(approx, sigma.weights, ut_mean(approx, sigma.weights))
    cov_error_norm = float(np.linalg.norm(cov_exact - cov_approx))
    delta_y_scale = float(np.sqrt((sigma.offsets**2).sum(axis=1).max()))
    return FidelityReport(list(errors), mean_error, cov_error_norm, delta_y_scale)


def order_probe(dyn: DynamicsModel, est: StateEstimate, dt: float,
                cfg: FilterConfig, method: str,
                scales: list) -> OrderProbeResult:
    """Estimate the transport's order of accuracy by shrinking the prior.

    Each scale multiplies the prior covariance by scale^2 (offsets by
    scale); the worst per-point error is recorded and a log-log line is
    fitted against the offset magnitude. Zero-error entries are left out
    of the fit.

    Raises:
        ExactRegime: every scale produced zero error, so no slope exists.
        ValueError: scales not positive and strictly descending, or too
            few nonzero errors remain to fit a line.
    """
    scales = [float(s) for s in scales]
    if not scales or any(s <= 0.0 for s in scales):
        raise ValueError("scales must be positive")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly descending")

    points = []
    for scale in scales:
        shrunk = StateEstimate(est.t, est.mean, est.cov * scale**2)
        report = compare_sigma_propagation(dyn, shrunk, dt, cfg, method)
        worst = max(float(np.sqrt(e @ e)) for e in report.per_point_errors)
        points.append((report.delta_y_scale, worst))

    nonzero = [(d, e) for d, e in points if e > 0.0]
    if not nonzero:
        raise ExactRegime(f"{method} transport is exact on this model")
    if len(nonzero) < 2:
        raise ValueError("need at least two nonzero errors to fit a slope")
    log_d = np.log([d for d, _ in nonzero])
    log_e = np.log([e for _, e in nonzero])
    slope = float(np.polyfit(log_d, log_e, 1)[0])
    return OrderProbeResult(points, slope)
