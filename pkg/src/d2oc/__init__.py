"""Decentralized density-driven coverage and mapping with sensor-driven
sample renewal and online uncertainty estimation."""
__version__ = "0.1.0"

from .errors import (AllMassLost, ConfigError, D2ocError, DegenerateField, DimensionMismatch,
                     EmptySelection, InsufficientMass, SimulationError, SingularSystem,
                     SizeCapExceeded)
from .field import Domain, GaussianComponent, GroundTruthField, SensorModel
from .sample_map import RenewalConfig, Sample, SampleSet
from .transport import DiscreteMeasure, TransportPlan, exact_w2, w2_to_gt
from .control import AgentState, ControlConfig, LtiModel, analytic_control, double_integrator
from .stages import StageConfig, stage_a, stage_b, stage_c
from .mlp import AdaptiveStdNet, MeanVarBackend, MlpParams
from .scenario import Scenario, load_scenario, parse_scenario
from .sim import MetricsLog, RunResult, ablate, run

__all__ = [
    "__version__",
    "D2ocError", "ConfigError", "AllMassLost", "SizeCapExceeded", "DegenerateField",
    "EmptySelection", "SingularSystem", "InsufficientMass", "DimensionMismatch", "SimulationError",
    "Domain", "GaussianComponent", "GroundTruthField", "SensorModel",
    "RenewalConfig", "Sample", "SampleSet",
    "DiscreteMeasure", "TransportPlan", "exact_w2", "w2_to_gt",
    "AgentState", "ControlConfig", "LtiModel", "analytic_control", "double_integrator",
    "StageConfig", "stage_a", "stage_b", "stage_c",
    "AdaptiveStdNet", "MeanVarBackend", "MlpParams",
    "Scenario", "load_scenario", "parse_scenario",
    "MetricsLog", "RunResult", "ablate", "run",
]
