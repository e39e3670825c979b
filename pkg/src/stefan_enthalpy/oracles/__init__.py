"""Ground truth and baseline solvers used to judge the enthalpy scheme."""

from .decp import DecpState, decp_initial_state, decp_run, decp_step
from .neumann import NeumannSolution, neumann_profile, neumann_solve
from .reference import reference_solution

__all__ = [
    "DecpState", "decp_initial_state", "decp_run", "decp_step",
    "NeumannSolution", "neumann_profile", "neumann_solve",
    "reference_solution",
]
