"""Sigma-point Kalman filters with reduced-cost transport variants.

Five estimators behind one step interface: an extended Kalman filter,
the unscented filter, a spherical-simplex unscented filter, and two
fast variants that move sigma-point deviations with state-transition
matrices instead of integrating every point. Benchmark scenarios, an
analytic operation-count model, and transport-fidelity diagnostics
round out the package.
"""

from .complexity import (ALGORITHMS, CostModelParams, cost_bound,
                         reduction_percent, state_dim_limit)
from .diagnostics import (FidelityReport, OrderProbeResult,
                          compare_sigma_propagation, order_probe)
from .errors import (EstimationError, ExactRegime, IntegrationFailure,
                     NonConvergence, NoPositiveRoot, NotPositiveDefinite,
                     SingularGeometry, SingularInnovation)
from .filters import (FILTER_NAMES, FILTER_STEPS, FilterConfig,
                      PredictedMoments, StateEstimate, ekf_step,
                      espukf_step, kalman_update, resolve_kappa, spukf_step,
                      ssukf_step, ukf_step)
from .models import DynamicsModel, MeasurementModel
from .scenarios import SCENARIOS, LeoGnssScenario, ReentryScenario

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "CostModelParams",
    "cost_bound",
    "reduction_percent",
    "state_dim_limit",
    "FidelityReport",
    "OrderProbeResult",
    "compare_sigma_propagation",
    "order_probe",
    "EstimationError",
    "ExactRegime",
    "IntegrationFailure",
    "NonConvergence",
    "NoPositiveRoot",
    "NotPositiveDefinite",
    "SingularGeometry",
    "SingularInnovation",
    "FILTER_NAMES",
    "FILTER_STEPS",
    "FilterConfig",
    "PredictedMoments",
    "StateEstimate",
    "ekf_step",
    "espukf_step",
    "kalman_update",
    "resolve_kappa",
    "spukf_step",
    "ssukf_step",
    "ukf_step",
    "DynamicsModel",
    "MeasurementModel",
    "SCENARIOS",
    "LeoGnssScenario",
    "ReentryScenario",
    "__version__",
]
