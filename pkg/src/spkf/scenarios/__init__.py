"""Benchmark scenarios: each bundles models, truth simulation, scoring."""

from .base import SimulatedRun
from .gnss import LeoGnssConfig, LeoGnssScenario
from .reentry import ReentryConfig, ReentryScenario

SCENARIOS = {
    ReentryScenario.name: ReentryScenario,
    LeoGnssScenario.name: LeoGnssScenario,
}

__all__ = [
    "SCENARIOS",
    "SimulatedRun",
    "LeoGnssConfig",
    "LeoGnssScenario",
    "ReentryConfig",
    "ReentryScenario",
]
