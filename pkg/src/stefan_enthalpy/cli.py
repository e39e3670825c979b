"""
Command-line entry point: ``stefan-enthalpy {run,convergence,compare,stress}``.

Every command writes versioned CSV files into ``--out``. The first line of
each file is a ``# <schema> v<N>`` comment; floats carry 17 significant
digits so they round-trip exactly. Exit codes: 0 success, 1 invalid input,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMES, ConfigError, RunConfig, load_config
from .core import Scenario, ValidationError
from .enthalpy import classify
from .katzenelson import ConvergenceError
from .oracles.decp import decp_run
from .oracles.neumann import neumann_profile
from .stepper import StabilityError, StepFailure, explicit_dt_limit, run
from .studies import (DAY, compare_study, convergence_study, seasonal_stress,
                      stress_study)

log = logging.getLogger("stefan_enthalpy")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
SCHEMA_VERSION = 1
PHASE_LABELS = {-1: "frozen", 0: "mushy", 1: "unfrozen"}


class NumericalFailure(RuntimeError):
    """A study finished but reported convergence failures."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, schema: str, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        fh.write(f"# {schema} v{SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _surface_phase(temp: float) -> str:
    return PHASE_LABELS[int(np.sign(temp))]


# -- run ---------------------------------------------------------------------

def _resolve_theta(scheme: str | None, scenario: Scenario) -> tuple[str, float]:
    if scheme is None:
        theta = scenario.theta
        return ("explicit" if theta == 0.0 else "theta"), theta
    theta = SCHEMES[scheme]
    if scheme == "decp-implicit":
        theta = scenario.theta if scenario.theta > 0 else 1.0
    return scheme, theta


def cmd_run(cfg: RunConfig, args) -> int:
    if cfg.scenario is None:
        raise ConfigError(f"{cfg.path}: run needs a [column] table")
    scheme, theta = _resolve_theta(args.scheme, cfg.scenario)
    scenario = dataclasses.replace(cfg.scenario, theta=theta)
    options = cfg.options
    if args.seed is not None:
        options = dataclasses.replace(
            options, solver=dataclasses.replace(options.solver, rng_seed=args.seed))
    column = scenario.column
    if theta == 0.0 and options.guard == "raise":
        limit = explicit_dt_limit(column, options.guard_safety)
        if scenario.dt > limit:
            raise ValidationError(f"explicit dt={scenario.dt:g} s exceeds the "
                                  f"stability limit {limit:g} s")

    if scheme.startswith("decp"):
        states, audits = decp_run(scenario, theta=theta, guard=options.guard)
        records = [(s.time, s.temperature, s.enthalpy(column)) for s in states]
        stats = [(n, int(theta > 0), False, 0, a.relative_defect)
                 for n, a in enumerate(audits, 1)]
    else:
        result = run(scenario, options)
        records = [(s.time, s.gamma, s.eta) for s in result.states]
        stats = [(n, s.linear_solves, s.fast_path_taken, s.corner_events, s.energy_defect)
                 for n, s in enumerate(result.stats, 1)]

    def trajectory():
        for time, temp, eta in records:
            phases = classify(eta, column)
            yield time, 0, column.nodes[0], temp[0], "", _surface_phase(temp[0])
            for i in range(1, column.n_elements + 1):
                yield (time, i, column.nodes[i], temp[i], eta[i - 1],
                       PHASE_LABELS[int(phases[i - 1])])

    out = args.out
    write_csv(out / "trajectory.csv", "trajectory",
              ["time", "node", "depth", "temperature", "enthalpy", "phase"], trajectory())
    write_csv(out / "stats.csv", "stats",
              ["step", "linear_solves", "fast_path", "corner_events", "energy_defect"], stats)
    write_csv(out / "histogram.csv", "histogram", ["linear_solves", "steps"],
              sorted(histogram_from_stats(s[1] for s in stats).items()))
    log.info("run: %d steps, scheme %s, theta %g", len(stats), scheme, theta)
    return EXIT_OK


def histogram_from_stats(solves) -> dict[int, int]:
    counts: dict[int, int] = {}
    for s in solves:
        counts[int(s)] = counts.get(int(s), 0) + 1
    return dict(sorted(counts.items()))


# -- convergence -------------------------------------------------------------

def cmd_convergence(cfg: RunConfig, args) -> int:
    st = cfg.study
    thetas = st.thetas
    if args.scheme is not None:
        thetas = (SCHEMES[args.scheme],)
    rows = convergence_study(st.benchmark, thetas, st.ladder, st.base_dt, st.sample,
                             st.start, workers=args.workers)
    write_csv(args.out / "convergence.csv", "convergence",
              ["theta", "kappa", "h_min", "dt", "max_error", "error_day15", "energy_defect"],
              ([r.theta, r.kappa, r.h_min, r.dt, r.max_error, r.error_day15, r.energy_defect]
               for r in rows))
    sol = st.benchmark.solution()

    def profiles():
        for r in rows:
            if r.profile_day15 is None:
                continue
            nodes = st.benchmark.scenario(r.kappa, DAY, r.theta).column.nodes
            exact = neumann_profile(sol, nodes, 15 * DAY)
            for i, x in enumerate(nodes):
                yield r.theta, r.kappa, i, x, r.profile_day15[i], exact[i]

    write_csv(args.out / "convergence_profiles.csv", "convergence_profiles",
              ["theta", "kappa", "node", "depth", "numerical", "analytical"], profiles())
    for r in rows:
        log.info("theta %.2f kappa %4d max error %.4g", r.theta, r.kappa, r.max_error)
    return EXIT_OK


# -- compare -----------------------------------------------------------------

def cmd_compare(cfg: RunConfig, args) -> int:
    st = cfg.study
    res = compare_study(st.benchmark, st.compare_elements, st.compare_theta,
                        st.compare_dt, st.compare_day)
    methods = ("analytical", "enthalpy", "decp_implicit", "decp_explicit")

    def profiles():
        for m in methods:
            temp = getattr(res, m)
            for i, x in enumerate(res.depth):
                yield res.day, m, i, x, temp[i]

    write_csv(args.out / "compare_profiles.csv", "compare_profiles",
              ["day", "method", "node", "depth", "temperature"], profiles())
    plateaus = res.plateaus()
    mae = {"analytical": 0.0, "enthalpy": res.mae_enthalpy,
           "decp_implicit": res.mae_decp_implicit, "decp_explicit": res.mae_decp_explicit}
    write_csv(args.out / "compare_summary.csv", "compare_summary",
              ["method", "mae", "plateau_nodes", "interface_depth"],
              ([m, mae[m], plateaus[m], res.interface] for m in methods))
    log.info("MAE enthalpy %.4g, implicit DECP %.4g, explicit DECP %.4g",
             res.mae_enthalpy, res.mae_decp_implicit, res.mae_decp_explicit)
    return EXIT_OK


# -- stress ------------------------------------------------------------------

def cmd_stress(cfg: RunConfig, args) -> int:
    st = cfg.study
    seed = args.seed if args.seed is not None else st.seed
    if seed is None:
        raise ValidationError("stress needs an explicit seed (--seed or [stress].seed)")
    report = stress_study(st.problems, seed, st.max_kappa, st.guesses, st.mild,
                          cfg.options.solver, workers=args.workers)
    write_csv(args.out / "stress.csv", "stress",
              ["problem", "kappa", "converged", "linear_solves", "corner_events",
               "root_spread", "collinearity", "monotone", "hit_cap", "message"],
              ([o.index, o.kappa, o.converged, o.linear_solves, o.corner_events,
                o.root_spread, o.collinearity, o.monotone, o.hit_cap, o.message]
               for o in report.outcomes))
    write_csv(args.out / "stress_histogram.csv", "histogram", ["linear_solves", "steps"],
              report.histogram().items())
    seasonal = seasonal_stress(st.seasonal_columns, seed, st.seasonal_years,
                               amplitude=st.seasonal_amplitude)
    write_csv(args.out / "seasonal_histogram.csv", "histogram", ["linear_solves", "steps"],
              sorted(seasonal.items()))
    mode = max(seasonal.items(), key=lambda kv: (kv[1], -kv[0]))[0] if seasonal else 0
    summary = [("problems", len(report.outcomes)), ("seed", seed),
               ("failures", report.failures), ("corner_events", report.corner_events),
               ("max_root_spread", report.max_root_spread),
               ("max_collinearity", max((o.collinearity for o in report.outcomes),
                                        default=0.0)),
               ("non_monotone", sum(not o.monotone for o in report.outcomes)),
               ("seasonal_steps", sum(seasonal.values())), ("seasonal_mode", mode)]
    write_csv(args.out / "stress_summary.csv", "stress_summary", ["key", "value"], summary)
    if report.failures:
        raise NumericalFailure(f"{report.failures} of {len(report.outcomes)} "
                               "stress problems failed to converge")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "convergence": cmd_convergence,
            "compare": cmd_compare, "stress": cmd_stress}

# which --scheme values each command accepts
ALLOWED_SCHEMES = {
    "run": set(SCHEMES),
    "convergence": {"explicit", "backward-euler", "crank-nicolson"},
    "compare": set(),
    "stress": set(),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stefan-enthalpy",
        description="1D enthalpy finite-element Stefan solver and benchmarks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "integrate one scenario"),
                       ("convergence", "Neumann convergence ladder"),
                       ("compare", "enthalpy method against DECP"),
                       ("stress", "randomized root-finder stress test")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="TOML config file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--scheme", choices=sorted(SCHEMES), help="time scheme")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.scheme is not None and args.scheme not in ALLOWED_SCHEMES[args.command]:
            raise ValidationError(f"--scheme {args.scheme} is not valid for {args.command}")
        if args.workers < 1:
            raise ValidationError("--workers must be at least 1")
        if args.command == "run" and args.config is None:
            raise ValidationError("run needs --config")
        cfg = load_config(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ValidationError, StabilityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StepFailure, ConvergenceError, NumericalFailure, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
