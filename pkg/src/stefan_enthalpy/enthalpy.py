"""Enthalpy-temperature relation, phase labels and conductivity switch."""

from __future__ import annotations

from typing import TYPE_CHECKING, NamedTuple

import numpy as np

if TYPE_CHECKING:
    from .core import SoilColumn

FROZEN, MUSHY, UNFROZEN = -1, 0, 1


class PhaseCut(NamedTuple):
    """Bounds of the mushy enthalpy interval ``[lower, upper]`` per node."""

    lower: np.ndarray
    upper: np.ndarray


def phase_cuts(column: "SoilColumn") -> PhaseCut:
    """Mushy intervals of the unknown nodes 1..kappa."""
    upper = column.latent_heat[1:]
    return PhaseCut(np.zeros_like(upper), upper)


def beta_values(e, c_frozen, c_unfrozen, latent):
    """Elementwise temperature of enthalpy ``e``; broadcasts over arrays."""
    e = np.asarray(e, dtype=float)
    return np.where(e <= 0.0, e / c_frozen,
                    np.where(e >= latent, (e - latent) / c_unfrozen, 0.0))


def beta(e: float, node: int, column: "SoilColumn") -> float:
    """Temperature of enthalpy ``e`` at node ``node`` (0..kappa)."""
    if not 0 <= node <= column.n_elements:
        raise IndexError(f"node {node} outside 0..{column.n_elements}")
    if e <= 0.0:
        return e / column.c_frozen[node]
    lat = column.latent_heat[node]
    if e >= lat:
        return (e - lat) / column.c_unfrozen[node]
    return 0.0


def big_b(eta, column: "SoilColumn") -> np.ndarray:
    """Apply ``beta`` at nodes 1..kappa."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (column.n_elements,):
        raise ValueError(f"eta has shape {eta.shape}, expected ({column.n_elements},)")
    return beta_values(eta, column.c_frozen[1:], column.c_unfrozen[1:],
                       column.latent_heat[1:])


def classify(eta, column: "SoilColumn") -> np.ndarray:
    """
    Phase signature ``z`` in {-1, 0, 1}^kappa.

    The mushy interval is closed on both ends, so the faces ``eta_i = 0`` and
    ``eta_i = L_i`` are labelled mushy. Comparisons are exact.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (column.n_elements,):
        raise ValueError(f"eta has shape {eta.shape}, expected ({column.n_elements},)")
    lat = column.latent_heat[1:]
    z = np.zeros(eta.shape, dtype=np.int8)
    z[eta < 0.0] = FROZEN
    z[eta > lat] = UNFROZEN
    return z


def conductivity(u: float, element: int, column: "SoilColumn") -> float:
    """Conductivity of element ``element`` (0-based) at temperature ``u``.

    The mushy value is returned at exactly 0 degrees; it never affects the
    discrete equations because it always multiplies a zero temperature.
    """
    if u < 0.0:
        return float(column.k_frozen[element])
    if u > 0.0:
        return float(column.k_unfrozen[element])
    return float(column.k_mushy[element])


def element_conductivity(u, table: np.ndarray) -> np.ndarray:
    """Vectorized switch; ``table`` is the (3, kappa) phase table, ``u`` one value per element."""
    phase = np.sign(np.asarray(u, dtype=float)).astype(np.intp) + 1
    return table[phase, np.arange(table.shape[1])]


def enthalpy_from_temperature(u, liquid_fraction, c_frozen, c_unfrozen, latent):
    """
    Inverse of ``beta``; nodes at exactly 0 degrees take ``fraction * L``.
    """
    u = np.asarray(u, dtype=float)
    frac = np.broadcast_to(np.asarray(liquid_fraction, dtype=float), u.shape)
    return np.where(u < 0.0, c_frozen * u,
                    np.where(u > 0.0, latent + c_unfrozen * u, frac * latent))


def liquid_fraction(eta, latent) -> np.ndarray:
    """Liquid fraction implied by enthalpy: 0 frozen, 1 unfrozen, ``eta / L`` mushy."""
    eta = np.asarray(eta, dtype=float)
    return np.clip(eta / latent, 0.0, 1.0)
