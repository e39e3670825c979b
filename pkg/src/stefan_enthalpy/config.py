"""
TOML configuration for the command-line tool.

Times in config files are given in days and temperatures in degrees
Celsius; everything else is SI. The loader converts to seconds, so the
library itself only ever sees SI values. See ``configs/`` for a commented
example of every section.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .core import (ConstantBC, Material, MeshSpec, SampledBC, Scenario, SinusoidBC,
                   ValidationError, build_column)
from .katzenelson import SolverConfig
from .stepper import StepperOptions
from .studies import DAY, HOUR, NeumannBenchmark

SCHEMES = {
    "explicit": 0.0,
    "backward-euler": 1.0,
    "crank-nicolson": 0.5,
    "decp-implicit": None,
    "decp-explicit": 0.0,
}


class ConfigError(ValidationError):
    """A config file is unreadable or violates the schema."""


def _fail(path, where: str, msg: str):
    raise ConfigError(f"{path}: [{where}] {msg}")


def _section(doc: dict, name: str, path) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        _fail(path, name, "must be a table")
    return sec


def _take(sec: dict, key: str, kind, default, path, where: str):
    if key not in sec:
        return default
    value = sec[key]
    ok = isinstance(value, kind) and not (kind is not bool and isinstance(value, bool))
    if not ok:
        _fail(path, where, f"{key} has the wrong type ({type(value).__name__})")
    return value


def _check_keys(sec: dict, allowed, path, where: str):
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        _fail(path, where, f"unknown keys {unknown}")


NUM = (int, float)
_MATERIAL_KEYS = ("k_frozen", "k_mushy", "k_unfrozen", "c_frozen", "c_unfrozen",
                  "latent_heat")


@dataclass(frozen=True)
class StudySettings:
    """Parameters of the benchmark studies, already converted to SI."""

    benchmark: NeumannBenchmark = field(default_factory=NeumannBenchmark)
    ladder: tuple[int, ...] = (40, 80, 160, 320)
    thetas: tuple[float, ...] = (0.0, 0.5, 1.0)
    base_dt: float = HOUR
    sample: float = HOUR
    start: float = DAY
    compare_elements: int = 40
    compare_theta: float = 0.5
    compare_dt: float = DAY
    compare_day: int = 15
    problems: int = 1000
    max_kappa: int = 32
    guesses: int = 3
    mild: bool = False
    seasonal_columns: int = 10
    seasonal_years: float = 1.0
    seasonal_amplitude: float = 8.0
    seed: int | None = None


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs; ``scenario`` is ``None`` for study-only files."""

    path: Path | None
    scenario: Scenario | None
    options: StepperOptions
    study: StudySettings


def read_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message already carries line and column
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc


def _material(entry: dict, path, where: str) -> Material:
    _check_keys(entry, ("thickness", "name") + _MATERIAL_KEYS, path, where)
    values = {}
    for key in _MATERIAL_KEYS:
        if key not in entry:
            _fail(path, where, f"missing {key}")
        values[key] = float(_take(entry, key, NUM, None, path, where))
    try:
        return Material(name=str(entry.get("name", "")), **values)
    except ValidationError as exc:
        _fail(path, where, str(exc))


def _column(doc: dict, path):
    sec = _section(doc, "column", path)
    _check_keys(sec, ("layers", "n_elements", "ratio"), path, "column")
    layers = sec.get("layers")
    if not isinstance(layers, list) or not layers:
        _fail(path, "column", "needs at least one [[column.layers]] entry")
    stack = []
    for i, entry in enumerate(layers):
        where = f"column.layers[{i}]"
        if not isinstance(entry, dict) or "thickness" not in entry:
            _fail(path, where, "needs a thickness")
        stack.append((float(_take(entry, "thickness", NUM, None, path, where)),
                      _material(entry, path, where)))
    n = _take(sec, "n_elements", int, 10, path, "column")
    ratio = float(_take(sec, "ratio", NUM, 1.0, path, "column"))
    try:
        return build_column(stack, MeshSpec(n, ratio))
    except ValidationError as exc:
        _fail(path, "column", str(exc))


def _boundary(doc: dict, path, base: Path):
    sec = _section(doc, "boundary", path)
    kind = _take(sec, "kind", str, "constant", path, "boundary")
    try:
        if kind == "constant":
            _check_keys(sec, ("kind", "value"), path, "boundary")
            return ConstantBC(float(_take(sec, "value", NUM, 0.0, path, "boundary")))
        if kind == "sinusoid":
            _check_keys(sec, ("kind", "mean", "amplitude", "period_days", "phase_days"),
                        path, "boundary")
            return SinusoidBC(float(_take(sec, "mean", NUM, 0.0, path, "boundary")),
                              float(_take(sec, "amplitude", NUM, 0.0, path, "boundary")),
                              float(_take(sec, "period_days", NUM, 365.0, path, "boundary")) * DAY,
                              float(_take(sec, "phase_days", NUM, 0.0, path, "boundary")) * DAY)
        if kind == "sampled":
            _check_keys(sec, ("kind", "days", "values", "file"), path, "boundary")
            if "file" in sec:
                table = np.loadtxt(base / _take(sec, "file", str, "", path, "boundary"),
                                   delimiter=",", comments="#", ndmin=2)
                days, values = table[:, 0], table[:, 1]
            else:
                days = _take(sec, "days", list, None, path, "boundary")
                values = _take(sec, "values", list, None, path, "boundary")
                if days is None or values is None:
                    _fail(path, "boundary", "sampled forcing needs days and values or a file")
            return SampledBC(np.asarray(days, float) * DAY, np.asarray(values, float))
    except (ValidationError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        _fail(path, "boundary", str(exc))
    _fail(path, "boundary", f"unknown kind {kind!r} (constant, sinusoid, sampled)")


def _solver(doc: dict, path) -> StepperOptions:
    sec = _section(doc, "solver", path)
    _check_keys(sec, ("t_r", "t_a", "s_x", "seed", "max_iterations", "fast_path",
                      "predictor", "guard"), path, "solver")
    defaults = SolverConfig()
    try:
        solver = SolverConfig(
            tol_rel=float(_take(sec, "t_r", NUM, defaults.tol_rel, path, "solver")),
            tol_abs=float(_take(sec, "t_a", NUM, defaults.tol_abs, path, "solver")),
            enthalpy_scale=float(_take(sec, "s_x", NUM, defaults.enthalpy_scale, path, "solver")),
            max_iterations=_take(sec, "max_iterations", int, None, path, "solver"),
            rng_seed=_take(sec, "seed", int, defaults.rng_seed, path, "solver"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        _fail(path, "solver", str(exc))
    guard = _take(sec, "guard", str, "raise", path, "solver")
    if guard not in ("raise", "warn", "off"):
        _fail(path, "solver", f"guard must be raise, warn or off, got {guard!r}")
    return StepperOptions(solver=solver,
                          fast_path=_take(sec, "fast_path", bool, False, path, "solver"),
                          predictor=_take(sec, "predictor", bool, False, path, "solver"),
                          guard=guard)


def _scenario(doc: dict, path, base: Path) -> Scenario:
    column = _column(doc, path)
    bc = _boundary(doc, path, base)
    init = _section(doc, "initial", path)
    _check_keys(init, ("temperature", "liquid_fraction"), path, "initial")
    u0 = _take(init, "temperature", (int, float, list), 0.0, path, "initial")
    frac = _take(init, "liquid_fraction", (int, float, list), 0.0, path, "initial")
    tm = _section(doc, "time", path)
    _check_keys(tm, ("dt_days", "duration_days", "theta"), path, "time")
    if "dt_days" not in tm or "duration_days" not in tm:
        _fail(path, "time", "dt_days and duration_days are required")
    try:
        return Scenario(column, bc, np.asarray(u0, float),
                        float(_take(tm, "theta", NUM, 1.0, path, "time")),
                        float(_take(tm, "dt_days", NUM, None, path, "time")) * DAY,
                        float(_take(tm, "duration_days", NUM, None, path, "time")) * DAY,
                        np.asarray(frac, float))
    except ValidationError as exc:
        _fail(path, "initial/time", str(exc))


def _study(doc: dict, path) -> StudySettings:
    out: dict[str, Any] = {}
    bench = _section(doc, "benchmark", path)
    bench_fields = {f.name for f in dataclasses.fields(NeumannBenchmark)}
    _check_keys(bench, bench_fields, path, "benchmark")
    try:
        out["benchmark"] = NeumannBenchmark(**{k: float(_take(bench, k, NUM, 0, path, "benchmark"))
                                               for k in bench})
        out["benchmark"].material()
        out["benchmark"].solution()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        _fail(path, "benchmark", str(exc))

    conv = _section(doc, "convergence", path)
    _check_keys(conv, ("ladder", "thetas", "base_dt_hours", "sample_hours", "start_days"),
                path, "convergence")
    if "ladder" in conv:
        ladder = _take(conv, "ladder", list, None, path, "convergence")
        if len(ladder) < 2 or any(not isinstance(k, int) or k < 1 for k in ladder):
            _fail(path, "convergence", "ladder must list at least two positive integers")
        out["ladder"] = tuple(ladder)
    if "thetas" in conv:
        thetas = tuple(float(t) for t in _take(conv, "thetas", list, None, path, "convergence"))
        if not thetas or any(not 0.0 <= t <= 1.0 for t in thetas):
            _fail(path, "convergence", "thetas must lie in [0, 1]")
        out["thetas"] = thetas
    for key, name, unit in (("base_dt_hours", "base_dt", HOUR),
                            ("sample_hours", "sample", HOUR), ("start_days", "start", DAY)):
        if key in conv:
            value = float(_take(conv, key, NUM, None, path, "convergence"))
            if not value > 0:
                _fail(path, "convergence", f"{key} must be positive")
            out[name] = value * unit

    cmp_ = _section(doc, "compare", path)
    _check_keys(cmp_, ("n_elements", "theta", "dt_days", "day"), path, "compare")
    for key, name, kind in (("n_elements", "compare_elements", int), ("theta", "compare_theta", NUM),
                            ("day", "compare_day", int)):
        if key in cmp_:
            out[name] = _take(cmp_, key, kind, None, path, "compare")
    if "dt_days" in cmp_:
        out["compare_dt"] = float(_take(cmp_, "dt_days", NUM, None, path, "compare")) * DAY

    st = _section(doc, "stress", path)
    _check_keys(st, ("problems", "max_kappa", "guesses", "mild", "seasonal_columns",
                     "seasonal_years", "seasonal_amplitude", "seed"), path, "stress")
    for key, kind in (("problems", int), ("max_kappa", int), ("guesses", int),
                      ("mild", bool), ("seasonal_columns", int), ("seasonal_years", NUM),
                      ("seasonal_amplitude", NUM), ("seed", int)):
        if key in st:
            out[key] = _take(st, key, kind, None, path, "stress")
    for key in ("problems", "max_kappa", "seasonal_columns"):
        if key in out and out[key] < 1:
            _fail(path, "stress", f"{key} must be at least 1")
    if out.get("guesses", 1) < 0:
        _fail(path, "stress", "guesses must be non-negative")
    return StudySettings(**out)


_TOP = ("column", "boundary", "initial", "time", "solver", "benchmark", "convergence",
        "compare", "stress")


def load_config(path=None) -> RunConfig:
    """
    Parse a config file; ``None`` yields the built-in benchmark settings.

    A ``[column]`` table makes the file a run scenario; files without one
    only configure the studies.
    """
    if path is None:
        return RunConfig(None, None, StepperOptions(), StudySettings())
    path = Path(path)
    doc = read_toml(path)
    _check_keys(doc, _TOP, path, "top level")
    orphans = [k for k in ("boundary", "initial", "time") if k in doc and "column" not in doc]
    if orphans:
        _fail(path, orphans[0], "scenario sections need a [column] table")
    scenario = _scenario(doc, path, path.parent) if "column" in doc else None
    return RunConfig(path, scenario, _solver(doc, path), _study(doc, path))
