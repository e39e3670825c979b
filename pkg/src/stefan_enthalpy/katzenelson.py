"""
Katzenelson root finder for the piecewise-affine time-step residual.

Starting from ``x0`` the iterates follow the preimage of the straight segment
from ``Phi(x0)`` to 0. Inside one box of the phase partition a Newton step
with that box's Jacobian moves exactly along the segment; when the step
would leave the box the iterate stops on the first face and continues with
the Jacobian of the neighbouring box. Because ``Phi`` is a piecewise-affine
homeomorphism the chain reaches the root after finitely many pieces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assembly import StepProblem
from .linalg import solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """
    Tolerances of the root finder.

    tol_rel, tol_abs : stopping rule ``|Phi(x)| <= |Phi(x0)| tol_rel + tol_abs``;
        ``tol_rel`` is also the threshold below which crossing fractions are
        treated as zero or as coincident.
    enthalpy_scale : characteristic enthalpy (J/m^3) for the latent-heat
        guard and the size of corner perturbations.
    max_iterations : cap on linear solves; ``None`` means ``50 * kappa``.
    """

    tol_rel: float = 1e-12
    tol_abs: float = 1e-6
    enthalpy_scale: float = 1e6
    max_iterations: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.tol_rel > 0 and self.tol_abs > 0 and self.enthalpy_scale > 0):
            raise ValueError("tolerances and enthalpy scale must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def iteration_cap(self, n: int) -> int:
        return self.max_iterations if self.max_iterations is not None else 50 * n


@dataclass(eq=False)
class SolveReport:
    root: np.ndarray
    linear_solves: int
    corner_perturbations: int
    residual_norm: float
    initial_residual_norm: float
    trace: list[np.ndarray] | None = field(default=None, repr=False)
    trace_residuals: list[np.ndarray] | None = field(default=None, repr=False)
    # index of the first trace entry after each corner perturbation
    perturbed_at: list[int] = field(default_factory=list)


class ConvergenceError(RuntimeError):
    """Iteration cap reached; carries the best iterate seen."""

    def __init__(self, message: str, best: np.ndarray, residual_norm: float):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm


def _candidates(x, v, latent, config: SolverConfig):
    """Admissible crossing fractions and the face value reached at each."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    moving = v != 0.0
    lam = np.full(2 * x.size, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam[:x.size] = np.where(moving, -x / v, np.inf)
        lam[x.size:] = np.where(moving, (latent - x) / v, np.inf)
    ok = np.isfinite(lam) & (lam > config.tol_rel)
    # a vanishing mushy interval has no second face worth stopping at
    ok[x.size:] &= latent > config.enthalpy_scale * config.tol_rel
    idx = np.nonzero(ok)[0]
    order = np.argsort(lam[idx], kind="stable")
    idx = idx[order]
    faces = np.where(idx < x.size, 0.0, latent[idx % x.size])
    return lam[idx], idx % x.size, faces


def crossing_fractions(x, v, latent, config: SolverConfig | None = None) -> np.ndarray:
    """
    Sorted step fractions at which ``x + lam v`` meets a face ``x_i = 0`` or ``x_i = L_i``.

    Fractions not exceeding ``tol_rel`` are dropped, as are ``L``-faces of
    nodes whose latent heat is below ``enthalpy_scale * tol_rel``.
    Components with ``v_i = 0`` contribute nothing.
    """
    config = config or SolverConfig()
    return _candidates(x, v, np.asarray(latent, dtype=float), config)[0]


def _nudge_off_faces(x, latent, scale):
    """Move coordinates lying exactly on a face into the mushy interior."""
    x = x.copy()
    wide = latent > 2.0 * scale
    x[(x == 0.0) & wide] = scale
    on_top = (x == latent) & wide
    x[on_top] = latent[on_top] - scale
    return x


def solve_phi(problem: StepProblem, initial=None, config: SolverConfig | None = None,
              record_trace: bool = False) -> SolveReport:
    """
    Root of ``problem.phi`` by Katzenelson's method.

    Parameters
    ----------
    problem : StepProblem
    initial : array_like, optional
        Starting enthalpy; defaults to the previous step's enthalpy.
    config : SolverConfig, optional
    record_trace : bool
        Keep every iterate and residual in the report.

    Raises
    ------
    ConvergenceError
        If the iteration cap is reached.
    """
    config = config or SolverConfig()
    column = problem.column
    latent = problem.latent
    n = column.n_elements
    cap = config.iteration_cap(n)
    rng = np.random.default_rng(config.rng_seed)

    x = np.array(problem.prev.eta if initial is None else initial, dtype=float)
    r = problem.phi(x)
    r_ini = float(np.linalg.norm(r))
    threshold = r_ini * config.tol_rel + config.tol_abs
    if r_ini > threshold:
        # a start on a face has an ambiguous Jacobian; any interior start is valid
        nudged = _nudge_off_faces(x, latent, config.enthalpy_scale * 1e-8)
        if not np.array_equal(nudged, x):
            x = nudged
            r = problem.phi(x)
            r_ini = float(np.linalg.norm(r))
            threshold = r_ini * config.tol_rel + config.tol_abs

    jac = problem.jacobian_at(x)
    norm = r_ini
    best, best_norm = x.copy(), norm
    solves = corners = 0
    trace = [x.copy()] if record_trace else None
    trace_res = [r.copy()] if record_trace else None
    perturbed_at: list[int] = []

    # An iterate parked on a face can pass the absolute tolerance while the
    # exact root of the entered piece is one more solve away; finish the chain
    # unless the relative tolerance alone is already met.
    full_step = True
    while norm > threshold or (not full_step and norm > r_ini * config.tol_rel):
        if solves >= cap:
            raise ConvergenceError(
                f"no root after {solves} linear solves (|Phi| = {norm:.3e})",
                best, best_norm)
        v = -solve(jac, r)
        solves += 1
        lam, nodes, faces = _candidates(x, v, latent, config)
        lam1 = min(lam[0], 1.0) if lam.size > 0 else 1.0
        lam2 = min(lam[1], 1.0) if lam.size > 1 else 1.0

        if abs(lam1 - lam2) > config.tol_rel or lam1 > 1.0 - config.tol_rel:
            jac = problem.jacobian_at(x + 0.5 * (lam1 + lam2) * v)
            x = x + lam1 * v
            full_step = lam1 >= 1.0
            if lam1 < 1.0:
                # land exactly on the face that stopped the step
                x[nodes[0]] = faces[0]
        else:
            corners += 1
            full_step = False
            x = x + 0.5 * lam1 * v + rng.uniform(-1.0, 1.0, n) * config.enthalpy_scale * 1e-8
            jac = problem.jacobian_at(x)
            if record_trace:
                perturbed_at.append(len(trace))
            log.debug("corner hit at lambda=%.3e, perturbing", lam1)

        r = problem.phi(x)
        norm = float(np.linalg.norm(r))
        if norm < best_norm:
            best, best_norm = x.copy(), norm
        if record_trace:
            trace.append(x.copy())
            trace_res.append(r.copy())

    return SolveReport(root=x, linear_solves=solves, corner_perturbations=corners,
                       residual_norm=norm, initial_residual_norm=r_ini,
                       trace=trace, trace_residuals=trace_res,
                       perturbed_at=perturbed_at)
