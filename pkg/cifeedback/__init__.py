__version__ = "0.1.0"

from .model import BoundaryCondition, ModelParams, check_stabilization_conditions
from .mesh import FemFunction, MeshPartition, project_initial, uniform_partition
from .interpolants import InterpolantSpec, ObservationOperator
from .stepper import StepperConfig, backward_euler_step, simulate
from .diagnostics import Trajectory, decay_rate_fit, verify_discrete_decay
from .convergence import compute_reference, control_study, fd_oracle, spatial_study, temporal_study
from .experiment_config import ExperimentConfig
from .experiment_runner import ExperimentRunner, DEFAULT_PRESETS_FILEPATH

__all__ = [
    "BoundaryCondition",
    "ModelParams",
    "check_stabilization_conditions",
    "FemFunction",
    "MeshPartition",
    "project_initial",
    "uniform_partition",
    "InterpolantSpec",
    "ObservationOperator",
    "StepperConfig",
    "backward_euler_step",
    "simulate",
    "Trajectory",
    "decay_rate_fit",
    "verify_discrete_decay",
    "compute_reference",
    "control_study",
    "fd_oracle",
    "spatial_study",
    "temporal_study",
    "ExperimentConfig",
    "ExperimentRunner",
    "DEFAULT_PRESETS_FILEPATH",
]
