"""
Two-phase Neumann similarity solution for freezing of a half space.

A half space initially at ``u0 > 0`` has its surface held at ``s < 0`` from
``t = 0``. The freezing front sits at ``X(t) = 2 lam sqrt(alpha_f t)`` where
``lam`` balances the conductive fluxes on both sides of the front against
the latent heat released by its motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfcx


@dataclass(frozen=True)
class NeumannSolution:
    lam: float
    surface_temp: float
    initial_temp: float
    k_frozen: float
    k_unfrozen: float
    c_frozen: float
    c_unfrozen: float
    latent: float

    @property
    def alpha_f(self) -> float:
        return self.k_frozen / self.c_frozen

    @property
    def alpha_u(self) -> float:
        return self.k_unfrozen / self.c_unfrozen

    def interface(self, t) -> np.ndarray | float:
        return 2.0 * self.lam * np.sqrt(self.alpha_f * np.asarray(t, dtype=float))

    def interface_speed(self, t: float) -> float:
        return self.lam * math.sqrt(self.alpha_f / t)

    def flux_jump(self, t: float) -> float:
        """``k_f u_x(X-) - k_u u_x(X+)``, i.e. the heat released per unit front advance times speed."""
        sqrt_pi = math.sqrt(math.pi)
        mu = self.lam * math.sqrt(self.alpha_f / self.alpha_u)
        grad_f = (-self.surface_temp * math.exp(-self.lam ** 2)
                  / (sqrt_pi * math.erf(self.lam) * math.sqrt(self.alpha_f * t)))
        grad_u = (self.initial_temp / (sqrt_pi * erfcx(mu))
                  / math.sqrt(self.alpha_u * t))
        return self.k_frozen * grad_f - self.k_unfrozen * grad_u


def _stefan_residual(lam, s, u0, k_f, k_u, c_f, c_u, latent):
    """Front energy balance divided by ``L sqrt(alpha_f)``; decreasing in ``lam``."""
    a_f, a_u = k_f / c_f, k_u / c_u
    mu = lam * math.sqrt(a_f / a_u)
    sqrt_pi = math.sqrt(math.pi)
    frozen = k_f * (-s) * math.exp(-lam * lam) / (sqrt_pi * math.erf(lam) * math.sqrt(a_f))
    thawed = k_u * u0 / (sqrt_pi * erfcx(mu) * math.sqrt(a_u))
    return (frozen - thawed) / (latent * math.sqrt(a_f)) - lam


def neumann_solve(surface_temp: float, initial_temp: float, k_frozen: float,
                  k_unfrozen: float, c_frozen: float, c_unfrozen: float,
                  latent: float, tol: float = 1e-12) -> NeumannSolution:
    """
    Solve the front equation for ``lam`` by bracketing bisection.

    Raises
    ------
    ValueError
        For non-physical data (``s >= 0``, ``u0 <= 0``, non-positive constants)
        or if no bracket is found.
    """
    if not surface_temp < 0.0 < initial_temp:
        raise ValueError("need surface_temp < 0 < initial_temp")
    for name, val in (("k_frozen", k_frozen), ("k_unfrozen", k_unfrozen),
                      ("c_frozen", c_frozen), ("c_unfrozen", c_unfrozen),
                      ("latent", latent)):
        if not val > 0:
            raise ValueError(f"{name} must be positive")
    args = (surface_temp, initial_temp, k_frozen, k_unfrozen, c_frozen,
            c_unfrozen, latent)

    lo, hi = 1e-300, 1.0
    while _stefan_residual(hi, *args) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise ValueError("could not bracket the front parameter")
    # tighten the lower end; the residual blows up towards zero
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _stefan_residual(mid, *args) > 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return NeumannSolution(lam, surface_temp, initial_temp, k_frozen, k_unfrozen,
                           c_frozen, c_unfrozen, latent)


def stefan_residual(sol: NeumannSolution, lam: float | None = None) -> float:
    """Normalized residual of the front equation at ``lam`` (default: the solution's)."""
    return _stefan_residual(sol.lam if lam is None else lam, sol.surface_temp,
                            sol.initial_temp, sol.k_frozen, sol.k_unfrozen,
                            sol.c_frozen, sol.c_unfrozen, sol.latent)


def neumann_profile(sol: NeumannSolution, x, t: float):
    """Temperature at depth(s) ``x`` and time ``t > 0``."""
    if not t > 0:
        raise ValueError("the similarity profile needs t > 0")
    x = np.asarray(x, dtype=float)
    front = sol.interface(t)
    xi_f = x / (2.0 * math.sqrt(sol.alpha_f * t))
    xi_u = x / (2.0 * math.sqrt(sol.alpha_u * t))
    mu = sol.lam * math.sqrt(sol.alpha_f / sol.alpha_u)
    frozen = sol.surface_temp * (1.0 - erf(xi_f) / math.erf(sol.lam))
    # erfc(xi)/erfc(mu) written with scaled erfc to survive large arguments
    ratio = np.exp(mu * mu - xi_u * xi_u) * erfcx(xi_u) / erfcx(mu)
    thawed = sol.initial_temp * (1.0 - ratio)
    out = np.where(x < front, frozen, np.where(x > front, thawed, 0.0))
    return float(out) if out.ndim == 0 else out
