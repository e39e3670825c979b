"""
Soil column, boundary forcing, scenario and state containers.

Everything is strict SI internally: depths in m, times in s, temperatures
in degrees Celsius, conductivities in W/(m K), volumetric capacities in
J/(m^3 K) and volumetric latent heat in J/m^3.

Node ``0`` is the surface node carrying the Dirichlet value; nodes
``1..kappa`` are the unknowns. Element ``e`` (0-based) spans nodes ``e`` and
``e + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .enthalpy import big_b, enthalpy_from_temperature


class ValidationError(ValueError):
    """Raised when input data violates a positivity or shape assumption."""


def _frozen_array(values, name: str, length: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if length is not None and arr.size != length:
        raise ValidationError(f"{name} has length {arr.size}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Material:
    """Thermal constants of one homogeneous soil layer."""

    k_frozen: float
    k_mushy: float
    k_unfrozen: float
    c_frozen: float
    c_unfrozen: float
    latent_heat: float
    name: str = ""

    def __post_init__(self):
        for attr in ("k_frozen", "k_mushy", "k_unfrozen",
                     "c_frozen", "c_unfrozen", "latent_heat"):
            value = getattr(self, attr)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"{attr} must be positive, got {value!r}")


@dataclass(frozen=True, eq=False)
class SoilColumn:
    """
    Discretized soil column.

    Parameters
    ----------
    nodes : array_like (kappa+1,)
        Node depths ``0 = x_0 < x_1 < ... < x_kappa = D``.
    k_frozen, k_mushy, k_unfrozen : array_like (kappa,)
        Per-element conductivities.
    c_frozen, c_unfrozen, latent_heat : array_like (kappa+1,)
        Per-node volumetric capacities and latent heat.
    """

    nodes: np.ndarray
    k_frozen: np.ndarray
    k_mushy: np.ndarray
    k_unfrozen: np.ndarray
    c_frozen: np.ndarray
    c_unfrozen: np.ndarray
    latent_heat: np.ndarray
    h: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = _frozen_array(self.nodes, "nodes")
        if nodes.size < 2:
            raise ValidationError("a column needs at least one element")
        if nodes[0] != 0.0:
            raise ValidationError("the first node must sit at depth 0")
        h = np.diff(nodes)
        if np.any(h <= 0):
            raise ValidationError("node depths must be strictly increasing")
        n = nodes.size - 1
        object.__setattr__(self, "nodes", nodes)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        for name, length in (("k_frozen", n), ("k_mushy", n), ("k_unfrozen", n),
                             ("c_frozen", n + 1), ("c_unfrozen", n + 1),
                             ("latent_heat", n + 1)):
            arr = _frozen_array(getattr(self, name), name, length)
            if np.any(arr <= 0):
                raise ValidationError(f"{name} must be strictly positive")
            object.__setattr__(self, name, arr)

    @property
    def n_elements(self) -> int:
        return self.h.size

    @property
    def depth(self) -> float:
        return float(self.nodes[-1])

    def conductivity_by_phase(self) -> np.ndarray:
        """(3, kappa) table; row ``z + 1`` holds the element conductivities of phase ``z``."""
        return np.vstack([self.k_frozen, self.k_mushy, self.k_unfrozen])

    def refined(self, factor: int) -> "SoilColumn":
        """Split every element into ``factor`` equal sub-elements."""
        if factor < 1:
            raise ValidationError("refinement factor must be >= 1")
        if factor == 1:
            return self
        frac = np.arange(factor) / factor
        inner = (self.nodes[:-1, None] + frac[None, :] * self.h[:, None]).ravel()
        nodes = np.append(inner, self.nodes[-1])
        elem = np.repeat(np.arange(self.n_elements), factor)
        # nodal data is piecewise linear between original nodes
        return SoilColumn(
            nodes=nodes,
            k_frozen=self.k_frozen[elem],
            k_mushy=self.k_mushy[elem],
            k_unfrozen=self.k_unfrozen[elem],
            c_frozen=np.interp(nodes, self.nodes, self.c_frozen),
            c_unfrozen=np.interp(nodes, self.nodes, self.c_unfrozen),
            latent_heat=np.interp(nodes, self.nodes, self.latent_heat),
        )


@dataclass(frozen=True)
class MeshSpec:
    """Number of elements and geometric grading ratio (1 means uniform)."""

    n_elements: int
    ratio: float = 1.0

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValidationError("n_elements must be >= 1")
        if not self.ratio > 0:
            raise ValidationError("grading ratio must be positive")


def mesh_nodes(depth: float, mesh: MeshSpec) -> np.ndarray:
    """Node depths for a uniform or geometrically graded mesh of ``[0, depth]``."""
    n, r = mesh.n_elements, mesh.ratio
    if r == 1.0:
        sizes = np.full(n, depth / n)
    else:
        h1 = depth * (r - 1.0) / (r ** n - 1.0)
        sizes = h1 * r ** np.arange(n)
    nodes = np.concatenate([[0.0], np.cumsum(sizes)])
    nodes[-1] = depth
    return nodes


def build_column(layers: Sequence[tuple[float, Material]],
                 mesh: MeshSpec | int = MeshSpec(10)) -> SoilColumn:
    """
    Mesh a stack of homogeneous layers.

    Element properties come from the layer containing the element midpoint.
    Nodal capacities and latent heat are taken from the layer containing the
    node, averaged arithmetically over both layers for nodes that sit on a
    layer interface.
    """
    if not layers:
        raise ValidationError("at least one layer is required")
    if isinstance(mesh, int):
        mesh = MeshSpec(mesh)
    thickness = np.array([t for t, _ in layers], dtype=float)
    if np.any(~np.isfinite(thickness)) or np.any(thickness <= 0):
        raise ValidationError("layer thicknesses must be positive")
    materials = [m for _, m in layers]
    bounds = np.concatenate([[0.0], np.cumsum(thickness)])
    depth = float(bounds[-1])
    nodes = mesh_nodes(depth, mesh)

    mids = 0.5 * (nodes[:-1] + nodes[1:])
    elem_layer = np.clip(np.searchsorted(bounds, mids, side="right") - 1, 0, len(layers) - 1)

    def elem_prop(attr):
        return np.array([getattr(materials[i], attr) for i in elem_layer])

    tol = 1e-12 * depth
    c_f = np.empty(nodes.size)
    c_u = np.empty(nodes.size)
    lat = np.empty(nodes.size)
    for i, x in enumerate(nodes):
        on_interface = np.nonzero(np.abs(bounds[1:-1] - x) <= tol)[0]
        if on_interface.size:
            j = on_interface[0]
            owners = (materials[j], materials[j + 1])
        else:
            j = int(np.clip(np.searchsorted(bounds, x, side="right") - 1, 0, len(layers) - 1))
            owners = (materials[j],)
        c_f[i] = np.mean([m.c_frozen for m in owners])
        c_u[i] = np.mean([m.c_unfrozen for m in owners])
        lat[i] = np.mean([m.latent_heat for m in owners])

    return SoilColumn(nodes=nodes,
                      k_frozen=elem_prop("k_frozen"),
                      k_mushy=elem_prop("k_mushy"),
                      k_unfrozen=elem_prop("k_unfrozen"),
                      c_frozen=c_f, c_unfrozen=c_u, latent_heat=lat)


# -- surface forcing ---------------------------------------------------------

@dataclass(frozen=True)
class ConstantBC:
    value: float

    def __call__(self, t: float) -> float:
        return float(self.value)


@dataclass(frozen=True)
class SinusoidBC:
    """``mean + amplitude * sin(2 pi (t - phase) / period)``."""

    mean: float
    amplitude: float
    period: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValidationError("sinusoid period must be positive")

    def __call__(self, t: float) -> float:
        return float(self.mean + self.amplitude
                     * math.sin(2.0 * math.pi * (t - self.phase) / self.period))


@dataclass(frozen=True, eq=False)
class SampledBC:
    """Piecewise-linear interpolation of a sampled series, held constant outside."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _frozen_array(self.times, "times")
        values = _frozen_array(self.values, "values", times.size)
        if times.size == 0 or np.any(np.diff(times) <= 0):
            raise ValidationError("sample times must be non-empty and increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


BoundaryCondition = Callable[[float], float]


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    A complete run: column, forcing, initial data and scheme parameters.

    ``initial_temperature`` and ``liquid_fraction`` are per-node arrays of
    length ``kappa + 1``. The liquid fraction only matters at nodes whose
    initial temperature is exactly 0 and defaults to fully frozen.
    """

    column: SoilColumn
    surface_bc: BoundaryCondition
    initial_temperature: np.ndarray
    theta: float
    dt: float
    duration: float
    liquid_fraction: np.ndarray | None = None

    def __post_init__(self):
        n = self.column.n_elements + 1
        u0 = self.initial_temperature
        if callable(u0):
            u0 = [u0(x) for x in self.column.nodes]
        elif np.ndim(u0) == 0:
            u0 = np.full(n, float(u0))
        object.__setattr__(self, "initial_temperature",
                           _frozen_array(u0, "initial_temperature", n))
        frac = np.zeros(n) if self.liquid_fraction is None else self.liquid_fraction
        if np.ndim(frac) == 0:
            frac = np.full(n, float(frac))
        frac = _frozen_array(frac, "liquid_fraction", n)
        if np.any((frac < 0) | (frac > 1)):
            raise ValidationError("liquid fractions must lie in [0, 1]")
        object.__setattr__(self, "liquid_fraction", frac)
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError("theta must lie in [0, 1]")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt must be positive")
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ValidationError("duration must be non-negative")

    @property
    def n_steps(self) -> int:
        # tolerate duration/dt landing a hair below an integer
        return int(math.floor(self.duration / self.dt + 1e-9))


@dataclass(frozen=True, eq=False)
class State:
    """
    Nodal enthalpy (nodes 1..kappa) and temperature (nodes 0..kappa) at ``time``.

    The surface enthalpy is never stored: it does not enter the discrete
    equations and is not unique when the surface sits at 0 degrees.
    """

    eta: np.ndarray
    gamma: np.ndarray
    time: float

    def __post_init__(self):
        eta = _frozen_array(self.eta, "eta")
        gamma = _frozen_array(self.gamma, "gamma", eta.size + 1)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_enthalpy(cls, column: SoilColumn, eta, surface_temp: float,
                      time: float) -> "State":
        eta = np.asarray(eta, dtype=float)
        gamma = np.concatenate([[surface_temp], big_b(eta, column)])
        return cls(eta=eta, gamma=gamma, time=time)


def initial_state(scenario: Scenario) -> State:
    """Invert the enthalpy-temperature relation at t = 0."""
    col = scenario.column
    eta = enthalpy_from_temperature(scenario.initial_temperature[1:],
                                    scenario.liquid_fraction[1:],
                                    col.c_frozen[1:], col.c_unfrozen[1:],
                                    col.latent_heat[1:])
    return State.from_enthalpy(col, eta, scenario.surface_bc(0.0), 0.0)
