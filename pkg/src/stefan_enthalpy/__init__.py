"""One-dimensional enthalpy finite elements for soil freezing and thawing."""

from .core import (ConstantBC, Material, MeshSpec, SampledBC, Scenario, SinusoidBC,
                   SoilColumn, State, ValidationError, build_column, initial_state)
from .katzenelson import ConvergenceError, SolverConfig, SolveReport, solve_phi
from .stepper import (RunResult, StepperOptions, StepStats, run, step_explicit,
                      step_fast_linear, step_implicit)

__version__ = "0.1.0"

__all__ = [
    "ConstantBC", "ConvergenceError", "Material", "MeshSpec", "RunResult", "SampledBC",
    "Scenario", "SinusoidBC", "SoilColumn", "SolveReport", "SolverConfig", "State",
    "StepStats", "StepperOptions", "ValidationError", "build_column", "initial_state",
    "run", "solve_phi", "step_explicit", "step_fast_linear", "step_implicit",
]
