"""Fine-mesh, small-step explicit reference for columns without a closed-form solution."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..core import Scenario, State, initial_state
from ..stepper import RunResult, StepStats, explicit_dt_limit, step_explicit


def reference_solution(scenario: Scenario, factor: int = 4,
                       safety: float = 0.9) -> RunResult:
    """
    Integrate ``scenario`` explicitly with every element split ``factor`` times.

    The step is ``dt / factor``, further split into equal sub-steps where the
    refined mesh demands it for stability. Results are sampled back onto the
    original nodes and time grid, so the output lines up with a normal run.
    """
    if factor < 1:
        raise ValueError("refinement factor must be >= 1")
    coarse = scenario.column
    fine = coarse.refined(factor)
    u0 = np.interp(fine.nodes, coarse.nodes, scenario.initial_temperature)
    frac = np.interp(fine.nodes, coarse.nodes, scenario.liquid_fraction)
    fine_scenario = dataclasses.replace(scenario, column=fine, initial_temperature=u0,
                                        liquid_fraction=frac)

    dt_fine = scenario.dt / factor
    limit = explicit_dt_limit(fine, safety)
    substeps = factor * max(1, math.ceil(dt_fine / limit - 1e-12))
    h = scenario.dt / substeps

    pick = np.arange(0, fine.n_elements + 1, factor)
    state = initial_state(fine_scenario)

    def sample(s: State) -> State:
        return State(s.eta[pick[1:] - 1], s.gamma[pick], s.time)

    states, stats = [sample(state)], []
    for n in range(1, scenario.n_steps + 1):
        t0 = (n - 1) * scenario.dt
        for m in range(1, substeps + 1):
            t = t0 + m * h
            state, _ = step_explicit(fine, state, h, scenario.surface_bc(t), guard="off")
        state = State(state.eta, state.gamma, n * scenario.dt)
        states.append(sample(state))
        stats.append(StepStats())
    return RunResult(states, stats)
