"""
Algebraic objects of the fully discrete scheme.

Unknown ``j`` (0-based) is node ``j + 1``; element ``e`` joins nodes ``e``
and ``e + 1``. With the lumped mass ``M`` and the flux differences ``F`` one
implicit step is the root of

    Phi(x) = M (x - eta_n) / dt + theta F([s_{n+1}; B(x)])
             + (1 - theta) F([s_n; B(eta_n)]).

On each box ``P_z`` of the phase partition ``F([s; B(x)])`` is affine,
``A(z) (x - b(z)) + c(s)``, which makes ``Phi`` piecewise affine with
tridiagonal Jacobians ``J_z = M / dt + theta A(z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import SoilColumn, State
from .enthalpy import big_b, classify, conductivity, element_conductivity
from .linalg import Tridiagonal


def mass_matrix(column: SoilColumn) -> np.ndarray:
    """Diagonal of the lumped mass matrix for nodes 1..kappa (units m)."""
    h = column.h
    m = np.empty(h.size)
    m[:-1] = 0.5 * (h[:-1] + h[1:])
    m[-1] = 0.5 * h[-1]
    return m


def flux_q(gamma, column: SoilColumn) -> np.ndarray:
    """
    Element fluxes ``Q_e = (k_e(g_{e+1}) g_{e+1} - k_e(g_e) g_e) / h_e``.

    ``gamma`` holds all kappa+1 nodal temperatures. ``Q`` equals the
    temperature gradient times the element-average conductivity of the
    piecewise-linear temperature, i.e. minus the heat flux.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (column.n_elements + 1,):
        raise ValueError("gamma must hold kappa+1 nodal temperatures")
    table = column.conductivity_by_phase()
    left = element_conductivity(gamma[:-1], table) * gamma[:-1]
    right = element_conductivity(gamma[1:], table) * gamma[1:]
    return (right - left) / column.h


def flux_q_element(gamma, element: int, column: SoilColumn) -> float:
    """Scalar ``Q`` of one element (0-based), straight from the closed form."""
    g0, g1 = float(gamma[element]), float(gamma[element + 1])
    return ((conductivity(g1, element, column) * g1
             - conductivity(g0, element, column) * g0) / column.h[element])


def rhs_f(gamma, column: SoilColumn) -> np.ndarray:
    """``F_j = Q_j - Q_{j+1}`` with ``F`` of the bottom node equal to its left flux."""
    q = flux_q(gamma, column)
    f = q.copy()
    f[:-1] -= q[1:]
    return f


def phase_factors(z, column: SoilColumn) -> np.ndarray:
    """``g_j``: 1/c_f for frozen, 1/c_u for unfrozen and 0 for mushy nodes."""
    z = np.asarray(z)
    g = np.zeros(z.size)
    frozen, thawed = z == -1, z == 1
    g[frozen] = 1.0 / column.c_frozen[1:][frozen]
    g[thawed] = 1.0 / column.c_unfrozen[1:][thawed]
    return g


@dataclass(frozen=True, eq=False)
class AffinePiece:
    """``F([s; B(x)]) = a @ (x - b) + c`` for all ``x`` in the box of ``z``."""

    a: Tridiagonal
    b: np.ndarray
    c: np.ndarray


def stiffness_piece(z, column: SoilColumn) -> Tridiagonal:
    """The tridiagonal matrix ``A(z)``, built column by column."""
    z = np.asarray(z)
    n = column.n_elements
    if z.shape != (n,):
        raise ValueError(f"z has shape {z.shape}, expected ({n},)")
    table = column.conductivity_by_phase()
    idx = z.astype(np.intp) + 1
    g = phase_factors(z, column)
    # column j uses the conductivities of its own phase on both adjacent elements
    r_left = table[idx, np.arange(n)] / column.h
    r_right = np.zeros(n)
    r_right[:-1] = table[idx[:-1], np.arange(1, n)] / column.h[1:]
    return Tridiagonal(sub=-(r_right * g)[:-1],
                       diag=(r_left + r_right) * g,
                       sup=-(r_left * g)[1:])


def boundary_vector(surface_temp: float, column: SoilColumn) -> np.ndarray:
    """Surface contribution: only the first node sees the Dirichlet value."""
    c = np.zeros(column.n_elements)
    if surface_temp != 0.0:
        c[0] = -conductivity(surface_temp, 0, column) / column.h[0] * surface_temp
    return c


def affine_piece(z, surface_temp: float, column: SoilColumn) -> AffinePiece:
    z = np.asarray(z)
    b = np.where(z == 1, column.latent_heat[1:], 0.0)
    return AffinePiece(stiffness_piece(z, column), b,
                       boundary_vector(surface_temp, column))


def jacobian(z, dt: float, theta: float, column: SoilColumn,
             mass: np.ndarray | None = None) -> Tridiagonal:
    """``J_z = M / dt + theta A(z)``."""
    if mass is None:
        mass = mass_matrix(column)
    j = stiffness_piece(z, column).scaled(theta)
    return Tridiagonal(j.sub, j.diag + mass / dt, j.sup)


@dataclass(frozen=True, eq=False)
class StepProblem:
    """
    Residual map of one time step from ``prev`` to ``prev.time + dt``.

    ``prev.gamma[0]`` is the old surface value; ``surface_next`` enters the
    implicit part. The explicit part is frozen at construction.
    """

    column: SoilColumn
    prev: State
    dt: float
    theta: float
    surface_next: float
    mass: np.ndarray = field(init=False, repr=False)
    explicit_part: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        object.__setattr__(self, "mass", mass_matrix(self.column))
        object.__setattr__(self, "explicit_part",
                           (1.0 - self.theta) * rhs_f(self.prev.gamma, self.column))

    @property
    def latent(self) -> np.ndarray:
        return self.column.latent_heat[1:]

    def next_gamma(self, x) -> np.ndarray:
        return np.concatenate([[self.surface_next], big_b(x, self.column)])

    def phi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.mass * (x - self.prev.eta) / self.dt + self.explicit_part
        if self.theta != 0.0:
            out += self.theta * rhs_f(self.next_gamma(x), self.column)
        return out

    def phi_affine(self, x, z) -> np.ndarray:
        """Evaluate the affine piece of ``z`` at ``x``, whether or not ``x`` lies in its box."""
        x = np.asarray(x, dtype=float)
        piece = affine_piece(z, self.surface_next, self.column)
        return (self.mass * (x - self.prev.eta) / self.dt + self.explicit_part
                + self.theta * (piece.a @ (x - piece.b) + piece.c))

    def jacobian(self, z) -> Tridiagonal:
        return jacobian(z, self.dt, self.theta, self.column, self.mass)

    def jacobian_at(self, x) -> Tridiagonal:
        return self.jacobian(classify(x, self.column))

    def energy_balance(self, eta_next) -> "EnergyBalance":
        """
        Discrete energy budget of a candidate next enthalpy.

        ``change = sum M (eta' - eta) / dt`` and
        ``surface = -(theta Q_1(gamma') + (1 - theta) Q_1(gamma))`` agree at a
        root, since the flux differences telescope to the surface flux.
        """
        eta_next = np.asarray(eta_next, dtype=float)
        rates = self.mass * (eta_next - self.prev.eta) / self.dt
        q_new = self.theta * flux_q_element(self.next_gamma(eta_next), 0, self.column)
        q_old = (1.0 - self.theta) * flux_q_element(self.prev.gamma, 0, self.column)
        return EnergyBalance(change=float(np.sum(rates)), surface=-(q_new + q_old),
                             scale=float(np.sum(np.abs(rates)) + abs(q_new) + abs(q_old)))


class EnergyBalance(NamedTuple):
    change: float
    surface: float
    scale: float

    @property
    def relative_defect(self) -> float:
        """Mismatch relative to the summed magnitude of all budget terms."""
        gap = abs(self.change - self.surface)
        return gap / self.scale if self.scale > 0 else gap
