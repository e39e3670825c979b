"""
Benchmark drivers: Neumann convergence ladder, DECP comparison, solver stress.

The benchmark material set is permafrost-like but otherwise arbitrary; it is
not meant to reproduce any published error values.
"""

from __future__ import annotations

import dataclasses
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import StepProblem
from .core import (ConstantBC, Material, MeshSpec, SampledBC, Scenario, State,
                   build_column)
from .katzenelson import ConvergenceError, SolverConfig, solve_phi
from .oracles.decp import decp_run
from .oracles.neumann import NeumannSolution, neumann_profile, neumann_solve
from .stepper import StepperOptions, explicit_dt_limit, run

DAY = 86400.0
HOUR = 3600.0
PLATEAU_TOL = 1e-6


@dataclass(frozen=True)
class NeumannBenchmark:
    """Homogeneous column frozen from the surface; parameters in SI units."""

    c_frozen: float = 2.0e6
    c_unfrozen: float = 3.0e6
    k_frozen: float = 2.5
    k_unfrozen: float = 1.5
    k_mushy: float = 2.0
    latent_heat: float = 1.0e8
    surface_temp: float = -5.0
    initial_temp: float = 2.0
    depth: float = 4.0
    days: float = 20.0

    def material(self) -> Material:
        return Material(self.k_frozen, self.k_mushy, self.k_unfrozen,
                        self.c_frozen, self.c_unfrozen, self.latent_heat)

    def solution(self) -> NeumannSolution:
        return neumann_solve(self.surface_temp, self.initial_temp, self.k_frozen,
                             self.k_unfrozen, self.c_frozen, self.c_unfrozen,
                             self.latent_heat)

    def scenario(self, n_elements: int, dt: float, theta: float) -> Scenario:
        column = build_column([(self.depth, self.material())], MeshSpec(n_elements))
        return Scenario(column, ConstantBC(self.surface_temp), self.initial_temp,
                        theta, dt, self.days * DAY)


PERMAFROST_BENCHMARK = NeumannBenchmark()


def plateau_width(temperature) -> int:
    """Number of unknown nodes (depth > 0) sitting at 0 degrees."""
    return int(np.sum(np.abs(np.asarray(temperature)[1:]) < PLATEAU_TOL))


# -- convergence ladder -------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    theta: float
    kappa: int
    h_min: float
    dt: float
    max_error: float
    error_day15: float
    profile_day15: np.ndarray | None = field(default=None, compare=False, repr=False)
    energy_defect: float = 0.0


def _stable_dt(column, interval: float, safety: float = 0.9) -> float:
    """Largest forward-Euler step that divides ``interval`` evenly."""
    limit = explicit_dt_limit(column, safety)
    return interval / math.ceil(interval / limit)


def _rung(args) -> ConvergenceRow:
    bench, theta, kappa, dt, sample, start = args
    column = bench.scenario(kappa, 1.0, theta).column
    if theta == 0.0:
        dt = _stable_dt(column, sample)
    scenario = bench.scenario(kappa, dt, theta)
    result = run(scenario, StepperOptions(guard="raise"))
    sol = bench.solution()
    every = round(sample / dt)
    max_err, err15, prof = 0.0, float("nan"), None
    for n, state in enumerate(result.states):
        if n % every or state.time < start - 1e-6:
            continue
        err = float(np.max(np.abs(state.gamma
                                  - neumann_profile(sol, column.nodes, state.time))))
        max_err = max(max_err, err)
        if abs(state.time - 15 * DAY) < 1e-6:
            err15, prof = err, state.gamma.copy()
    return ConvergenceRow(theta, kappa, float(column.h.min()), dt, max_err, err15,
                          prof, result.max_energy_defect)


def convergence_study(bench: NeumannBenchmark = PERMAFROST_BENCHMARK,
                      thetas=(0.0, 0.5, 1.0), ladder=(40, 80, 160, 320),
                      base_dt: float = HOUR, sample: float = HOUR,
                      start: float = DAY, workers: int = 1) -> list[ConvergenceRow]:
    """
    Max nodal error against the Neumann profile for a doubling ladder.

    Implicit rungs refine ``dt`` with ``h`` starting from ``base_dt``;
    explicit rungs use the largest stable step dividing ``sample``. Errors
    are sampled every ``sample`` seconds from ``start`` to the end.
    """
    jobs = [(bench, float(theta), int(k), base_dt * ladder[0] / k, sample, start)
            for theta in thetas for k in ladder]
    rows = _map(_rung, jobs, workers)
    return sorted(rows, key=lambda r: (r.theta, r.kappa))


# -- DECP comparison -----------------------------------------------------------

@dataclass
class ComparisonResult:
    depth: np.ndarray
    day: float
    analytical: np.ndarray
    enthalpy: np.ndarray
    decp_implicit: np.ndarray
    decp_explicit: np.ndarray
    mae_enthalpy: float
    mae_decp_implicit: float
    mae_decp_explicit: float
    interface: float
    energy_defects: list[float] = field(default_factory=list)

    def plateaus(self) -> dict[str, int]:
        return {"analytical": plateau_width(self.analytical),
                "enthalpy": plateau_width(self.enthalpy),
                "decp_implicit": plateau_width(self.decp_implicit),
                "decp_explicit": plateau_width(self.decp_explicit)}


def _mae(profiles, sol, nodes, days) -> float:
    return float(np.mean([np.mean(np.abs(profiles[d]
                                         - neumann_profile(sol, nodes, d * DAY)))
                          for d in days]))


def compare_study(bench: NeumannBenchmark = PERMAFROST_BENCHMARK,
                  n_elements: int = 40, theta: float = 0.5, dt: float = DAY,
                  day: int = 15) -> ComparisonResult:
    """
    Enthalpy method against implicit and explicit DECP.

    The enthalpy method and implicit DECP share ``dt`` and ``theta``;
    explicit DECP uses the largest stable step dividing ``dt``.
    """
    scenario = bench.scenario(n_elements, dt, theta)
    column = scenario.column
    sol = bench.solution()
    enth = run(scenario)
    decp_states, decp_audits = decp_run(scenario)
    sub_dt = _stable_dt(column, dt)
    every = round(dt / sub_dt)
    expl_states, expl_audits = decp_run(
        dataclasses.replace(scenario, dt=sub_dt, theta=0.0), theta=0.0)
    expl_states = expl_states[::every]

    t_enth = np.array([s.gamma for s in enth.states])
    t_decp = np.array([s.temperature for s in decp_states])
    t_expl = np.array([s.temperature for s in expl_states])
    steps_per_day = round(DAY / dt)
    n_days = int(round(bench.days))
    idx = [d * steps_per_day for d in range(1, n_days + 1)]
    day_rows = {d: i for d, i in zip(range(1, n_days + 1), idx)}

    def by_day(arr):
        return {d: arr[i] for d, i in day_rows.items()}

    days = range(1, n_days + 1)
    at = day * steps_per_day
    return ComparisonResult(
        depth=column.nodes.copy(), day=float(day),
        analytical=np.asarray(neumann_profile(sol, column.nodes, day * DAY)),
        enthalpy=t_enth[at], decp_implicit=t_decp[at], decp_explicit=t_expl[at],
        mae_enthalpy=_mae(by_day(t_enth), sol, column.nodes, days),
        mae_decp_implicit=_mae(by_day(t_decp), sol, column.nodes, days),
        mae_decp_explicit=_mae(by_day(t_expl), sol, column.nodes, days),
        interface=float(sol.interface(day * DAY)),
        energy_defects=[s.energy_defect for s in enth.stats]
        + [a.relative_defect for a in decp_audits + expl_audits],
    )


# -- randomized solver stress ---------------------------------------------------

def _log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def random_column(rng, max_kappa: int = 32):
    """Layered column with 1-8 layers and log-uniform physical properties."""
    n_layers = int(rng.integers(1, 9))
    layers = []
    for _ in range(n_layers):
        k_f, k_m, k_u = _log_uniform(rng, 0.1, 5.0, 3)
        c_f, c_u = _log_uniform(rng, 5e5, 4e6, 2)
        lat = _log_uniform(rng, 1e6, 3e8)
        layers.append((float(_log_uniform(rng, 0.05, 3.0)),
                       Material(k_f, k_m, k_u, c_f, c_u, lat)))
    mesh = MeshSpec(int(rng.integers(1, max_kappa + 1)), float(rng.uniform(1.0, 1.3)))
    return build_column(layers, mesh)


def random_enthalpy(rng, column, z) -> np.ndarray:
    """A point strictly inside the box of signature ``z``."""
    z = np.asarray(z)
    lat = column.latent_heat[1:]
    temp = _log_uniform(rng, 0.01, 20.0, z.size)
    frac = rng.uniform(0.01, 0.99, z.size)
    return np.where(z < 0, -column.c_frozen[1:] * temp,
                    np.where(z > 0, lat + column.c_unfrozen[1:] * temp, frac * lat))


def random_signature(rng, n) -> np.ndarray:
    return rng.integers(-1, 2, n).astype(np.int8)


def distinct_signatures(rng, n, count) -> list[np.ndarray]:
    """Up to ``count`` pairwise different signatures (fewer only if 3**n < count)."""
    count = min(count, 3 ** n)
    seen, out = set(), []
    while len(out) < count:
        z = random_signature(rng, n)
        key = z.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(z)
    return out


def random_step_problem(rng, max_kappa: int = 32, mild: bool = False) -> StepProblem:
    column = random_column(rng, max_kappa)
    n = column.n_elements
    eta = random_enthalpy(rng, column, random_signature(rng, n))
    spread = 5.0 if mild else 30.0
    s_prev, s_next = rng.uniform(-spread, spread, 2)
    prev = State.from_enthalpy(column, eta, float(s_prev), 0.0)
    dt = float(_log_uniform(rng, 600.0, 30 * DAY))
    theta = float(rng.choice([0.5, 1.0])) if rng.random() < 0.5 else float(rng.uniform(0.05, 1.0))
    return StepProblem(column, prev, dt, theta, float(s_next))


def collinearity_defect(trace_residuals, perturbed_at=()) -> tuple[float, bool]:
    """
    Worst relative distance of the residuals from the ray through the first,
    and whether their norms decrease strictly. Only the stretch before the
    first corner perturbation is checked.
    """
    stop = min(perturbed_at) if perturbed_at else len(trace_residuals)
    res = trace_residuals[:stop]
    r0 = res[0]
    n0 = float(np.linalg.norm(r0))
    if n0 == 0.0:
        return 0.0, True
    unit = r0 / n0
    worst, norms = 0.0, [n0]
    for r in res[1:]:
        mu = float(unit @ r)
        worst = max(worst, float(np.linalg.norm(r - mu * unit)) / n0)
        norms.append(float(np.linalg.norm(r)))
    decreasing = all(b < a for a, b in zip(norms, norms[1:]))
    return worst, decreasing


@dataclass
class StressOutcome:
    index: int
    kappa: int
    converged: bool
    linear_solves: int
    corner_events: int
    root_spread: float
    collinearity: float
    monotone: bool
    hit_cap: bool
    message: str = ""


def _stress_one(args) -> StressOutcome:
    index, seed, max_kappa, guesses, mild, config = args
    rng = np.random.default_rng(seed)
    problem = random_step_problem(rng, max_kappa, mild)
    n = problem.column.n_elements
    starts = [None] + [random_enthalpy(rng, problem.column, z)
                       for z in distinct_signatures(rng, n, guesses)]
    roots, worst_col, monotone, corners = [], 0.0, True, 0
    solves = 0
    for k, start in enumerate(starts):
        try:
            rep = solve_phi(problem, start, config, record_trace=True)
        except ConvergenceError as exc:
            return StressOutcome(index, n, False, 0, 0, math.inf, math.inf, False,
                                 True, str(exc))
        if k == 0:
            solves = rep.linear_solves
        corners += rep.corner_perturbations
        col, mono = collinearity_defect(rep.trace_residuals, rep.perturbed_at)
        worst_col = max(worst_col, col)
        monotone &= mono
        roots.append(rep.root)
    roots = np.array(roots)
    spread = float(np.max(np.abs(roots - roots[0]))) if len(roots) > 1 else 0.0
    return StressOutcome(index, n, True, solves, corners, spread, worst_col,
                         monotone, False)


@dataclass
class StressReport:
    outcomes: list[StressOutcome]

    @property
    def failures(self) -> int:
        return sum(not o.converged for o in self.outcomes)

    @property
    def corner_events(self) -> int:
        return sum(o.corner_events for o in self.outcomes)

    def histogram(self) -> dict[int, int]:
        counts = Counter(o.linear_solves for o in self.outcomes if o.converged)
        return dict(sorted(counts.items()))

    @property
    def max_root_spread(self) -> float:
        return max((o.root_spread for o in self.outcomes), default=0.0)


def stress_study(n_problems: int, seed: int, max_kappa: int = 32, guesses: int = 3,
                 mild: bool = False, config: SolverConfig | None = None,
                 workers: int = 1) -> StressReport:
    """
    Solve ``n_problems`` random implicit steps from the previous enthalpy and
    from ``guesses`` random starts in distinct boxes of the phase partition.

    The linear-solve histogram counts the solve from the previous enthalpy,
    which is what a time-stepping run would do.
    """
    config = config or SolverConfig()
    seeds = np.random.SeedSequence(seed).spawn(n_problems)
    jobs = [(i, s, max_kappa, guesses, mild, config) for i, s in enumerate(seeds)]
    outcomes = _map(_stress_one, jobs, workers)
    return StressReport(sorted(outcomes, key=lambda o: o.index))


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def seasonal_stress(n_columns: int, seed: int, years: float = 1.0,
                    theta: float = 1.0, amplitude: float = 8.0,
                    max_kappa: int = 24) -> Counter:
    """
    Linear solves per daily step for random columns under a mild seasonal cycle.

    Columns start isothermal near the annual mean and are driven by a
    sinusoid of the given amplitude plus small daily noise.
    """
    counts: Counter = Counter()
    for child in np.random.SeedSequence(seed).spawn(n_columns):
        rng = np.random.default_rng(child)
        column = random_column(rng, max_kappa)
        n_days = int(round(365 * years))
        t = np.arange(n_days + 1) * DAY
        mean = rng.uniform(-3.0, 3.0)
        forcing = (mean + amplitude * np.sin(2 * np.pi * t / (365 * DAY))
                   + rng.normal(0.0, 1.0, t.size))
        scenario = Scenario(column, SampledBC(t, forcing), mean, theta, DAY,
                            n_days * DAY)
        result = run(scenario)
        counts.update(s.linear_solves for s in result.stats)
    return counts
