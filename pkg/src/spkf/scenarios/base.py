"""Shared plumbing for benchmark scenarios."""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..filters import StateEstimate
from ..models import MeasurementModel

__all__ = ["SimulatedRun"]


@dataclass
class SimulatedRun:
    """One seeded truth realization, shared by every filter under test.

    Attributes:
        times: (N+1,) epoch times including t0.
        states: (N+1, n) truth states.
        measurements: N measurement vectors, one per epoch after t0.
        meas_models: measurement model for each epoch (scenarios with a
            fixed sensor repeat one object).
        initial: the common initial estimate handed to every filter;
            part of the run so that any randomness in it is drawn from
            the same seeded generator as the truth.
        aux: scenario-specific extras (e.g. satellite geometry).
    """

    times: np.ndarray
    states: np.ndarray
    measurements: list
    meas_models: list
    initial: StateEstimate
    aux: Any = field(default=None, repr=False)
