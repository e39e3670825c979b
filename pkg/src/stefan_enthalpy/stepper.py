"""Theta-scheme time stepping: implicit, explicit and the single-phase fast path."""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .assembly import StepProblem, mass_matrix, rhs_f
from .core import Scenario, SoilColumn, State, initial_state
from .enthalpy import classify
from .katzenelson import ConvergenceError, SolverConfig, solve_phi
from .linalg import solve

log = logging.getLogger(__name__)


class StabilityError(ValueError):
    """The explicit step exceeds the configured stability bound."""


class StepFailure(RuntimeError):
    """A time step failed; ``step`` is its 1-based index within the run."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause


@dataclass
class StepStats:
    linear_solves: int = 0
    fast_path_taken: bool = False
    corner_events: int = 0
    energy_defect: float = 0.0


def explicit_dt_limit(column: SoilColumn, safety: float = 1.0) -> float:
    """
    Largest stable forward-Euler step for the worst-case single-phase operator.

    Gershgorin bound on ``M^-1 A``: every row sum is at most
    ``2 (k_left/h_left + k_right/h_right) / (M_ii c_min)`` with ``k`` the
    largest and ``c`` the smallest of the phase values; forward Euler is
    stable while ``dt`` times that bound stays below 2.
    """
    k = np.maximum(column.k_frozen, column.k_unfrozen)
    r = k / column.h
    rows = r.copy()
    rows[:-1] += r[1:]
    c_min = np.minimum(column.c_frozen, column.c_unfrozen)[1:]
    rate = 2.0 * rows / (mass_matrix(column) * c_min)
    return safety * 2.0 / float(rate.max())


def step_explicit(column: SoilColumn, prev: State, dt: float, surface_next: float,
                  guard: str = "raise", safety: float = 1.0) -> tuple[State, StepStats]:
    """
    Forward Euler: ``eta' = eta - dt M^-1 F(gamma)``; no linear solve.

    ``guard`` is ``"raise"``, ``"warn"`` or ``"off"``.
    """
    if guard != "off":
        limit = explicit_dt_limit(column, safety)
        if dt > limit:
            msg = f"explicit dt={dt:g} s exceeds stability limit {limit:g} s"
            if guard == "raise":
                raise StabilityError(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    eta = prev.eta - dt * rhs_f(prev.gamma, column) / mass_matrix(column)
    return State.from_enthalpy(column, eta, surface_next, prev.time + dt), StepStats()


def _strict_common_sign(values) -> int:
    values = np.asarray(values)
    if np.all(values < 0.0):
        return -1
    if np.all(values > 0.0):
        return 1
    return 0


def step_fast_linear(column: SoilColumn, prev: State, dt: float, theta: float,
                     surface_next: float) -> tuple[State, StepStats] | None:
    """
    Linear single-phase theta step, or ``None`` when it does not apply.

    Applies only if all temperatures and both surface values share one strict
    sign; the result is rejected unless it keeps that sign everywhere.
    """
    sign = _strict_common_sign(np.append(prev.gamma, surface_next))
    if sign == 0:
        return None
    problem = StepProblem(column, prev, dt, theta, surface_next)
    z = np.full(column.n_elements, sign, dtype=np.int8)
    eta = prev.eta - solve(problem.jacobian(z), problem.phi(prev.eta))
    if np.any(classify(eta, column) != sign):
        return None
    state = State.from_enthalpy(column, eta, surface_next, prev.time + dt)
    return state, StepStats(linear_solves=1, fast_path_taken=True)


def step_implicit(column: SoilColumn, prev: State, dt: float, theta: float,
                  surface_next: float, config: SolverConfig | None = None,
                  predictor: bool = False) -> tuple[State, StepStats]:
    """
    One implicit step: the next enthalpy is the root of the step residual.

    With ``predictor`` the root finder starts from the forward-Euler update
    instead of the previous enthalpy.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError("implicit steps need 0 < theta <= 1")
    problem = StepProblem(column, prev, dt, theta, surface_next)
    start = None
    if predictor:
        start = prev.eta - dt * rhs_f(prev.gamma, column) / problem.mass
    report = solve_phi(problem, start, config)
    state = State.from_enthalpy(column, report.root, surface_next, prev.time + dt)
    return state, StepStats(linear_solves=report.linear_solves,
                            corner_events=report.corner_perturbations)


@dataclass(frozen=True)
class StepperOptions:
    """
    fast_path : try the single-phase linear step before the nonlinear solve.
    predictor : start the root finder from an explicit step.
    guard : explicit stability policy, ``"raise"``, ``"warn"`` or ``"off"``.
    """

    solver: SolverConfig = field(default_factory=SolverConfig)
    fast_path: bool = False
    predictor: bool = False
    guard: str = "raise"
    guard_safety: float = 1.0


def advance(column: SoilColumn, prev: State, dt: float, theta: float,
            surface_next: float, options: StepperOptions = StepperOptions()
            ) -> tuple[State, StepStats]:
    """
    Dispatch one theta step to the explicit, fast or implicit path.

    The returned stats carry the relative energy-budget defect of the step.
    """
    if theta == 0.0:
        state, stats = step_explicit(column, prev, dt, surface_next,
                                     options.guard, options.guard_safety)
    else:
        fast = None
        if options.fast_path:
            fast = step_fast_linear(column, prev, dt, theta, surface_next)
        if fast is not None:
            state, stats = fast
        else:
            state, stats = step_implicit(column, prev, dt, theta, surface_next,
                                         options.solver, options.predictor)
    balance = StepProblem(column, prev, dt, theta, surface_next).energy_balance(state.eta)
    stats.energy_defect = balance.relative_defect
    return state, stats


@dataclass
class RunResult:
    states: list[State]
    stats: list[StepStats]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    def temperatures(self) -> np.ndarray:
        """(n_states, kappa+1) array of nodal temperatures."""
        return np.array([s.gamma for s in self.states])

    def solve_histogram(self) -> dict[int, int]:
        """Number of steps per count of linear solves (fast-path steps count one)."""
        counts = Counter(s.linear_solves for s in self.stats)
        return dict(sorted(counts.items()))

    @property
    def max_energy_defect(self) -> float:
        return max((s.energy_defect for s in self.stats), default=0.0)

    @property
    def mean_linear_solves(self) -> float:
        if not self.stats:
            return 0.0
        return float(np.mean([s.linear_solves for s in self.stats]))


def run(scenario: Scenario, options: StepperOptions = StepperOptions()) -> RunResult:
    """Integrate ``scenario`` on the uniform grid ``t_n = n dt`` up to its duration."""
    column = scenario.column
    state = initial_state(scenario)
    states, stats = [state], []
    for n in range(1, scenario.n_steps + 1):
        t_next = n * scenario.dt
        try:
            state, st = advance(column, state, scenario.dt, scenario.theta,
                                scenario.surface_bc(t_next), options)
        except (ConvergenceError, StabilityError, np.linalg.LinAlgError) as exc:
            raise StepFailure(n, exc) from exc
        # keep the grid free of accumulated round-off
        state = State(state.eta, state.gamma, t_next)
        states.append(state)
        stats.append(st)
    return RunResult(states, stats)
