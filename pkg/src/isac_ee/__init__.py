"""Energy-efficient beamforming for integrated sensing and communication downlinks."""

from .model import CovarianceSolution, ScenarioConfig, SteeringNorm, scenario_channels
from .pipeline import PipelineResult, solve_scenario

__all__ = ["CovarianceSolution", "PipelineResult", "ScenarioConfig", "SteeringNorm", "scenario_channels",
           "solve_scenario"]
__version__ = "0.1.0"
