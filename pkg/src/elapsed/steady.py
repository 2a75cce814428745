"""Steady states, their density profiles, and admissible initial activities."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .densities import integrate
from .errors import ConfigError
from .grid import AgeGrid, DensityField
from .model import FiringModel, SIGN_ZERO_TOL, psi_eval, psi_prime
from .roots import scan_roots


@dataclass(frozen=True)
class SteadyStateSet:
    roots: tuple        # ((N_star, psi_prime_sign), ...)
    residuals: tuple

    @property
    def values(self) -> list:
        return [r[0] for r in self.roots]

    @property
    def signs(self) -> list:
        return [r[1] for r in self.roots]

    def to_json(self) -> dict:
        return {"roots": self.values, "residuals": list(self.residuals),
                "psi_prime_signs": self.signs}


@dataclass(frozen=True)
class InitialBranchSet:
    roots: tuple
    tail_mass: float

    def to_json(self) -> dict:
        return {"roots": list(self.roots), "tail_mass": self.tail_mass}


def _sign(x, tol=1e-9):
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def steady_states(model: FiringModel, resolution: int = 4096) -> SteadyStateSet:
    sigma = model.sigma

    def g(u):
        return sigma * u + psi_eval(model, u) - 1.0

    found = [r for r in scan_roots(g, 0.0, model.p_hi, resolution) if r > 0]
    if not found:
        warnings.warn("no steady state found on (0, p_hi]")
    roots, residuals = [], []
    for r in found:
        y = abs(g(r))
        # a tangency carries no sign change of g, so psi' there is -sigma
        sgn = _sign(psi_prime(model, r))
        roots.append((r, sgn))
        residuals.append(float(y))
    return SteadyStateSet(tuple(roots), tuple(residuals))


def steady_profile(model: FiringModel, N_star: float,
                   grid: Optional[AgeGrid] = None) -> DensityField:
    """Discrete steady density: plateau N* on [0, sigma], geometric decay after.

    The decay factor per cell is 1 - dt*phi(N*), which is what the upwind
    step applies, so the returned field is an exact fixed point of the
    scheme and its discrete mass equals sigma*N* + psi(N*).
    """
    grid = grid or AgeGrid.for_model(model)
    res = abs(model.sigma * N_star + psi_eval(model, N_star) - 1.0)
    if res > 1e-8:
        raise ConfigError(f"N*={N_star} is not a steady state (residual {res:.3g})")
    rate = float(model.phi(N_star))
    q = 1.0 - grid.dt * rate
    K, J = grid.K, grid.n_cells
    vals = np.empty(J)
    vals[:K + 1] = N_star
    m = np.arange(1, J - K)
    vals[K + 1:] = N_star * q ** m
    vals[-1] = N_star * q ** (J - 1 - K) / (1.0 - q)
    return DensityField(grid, vals, meta={"N_star": N_star, "tail_rate": rate})


def tail_mass(model: FiringModel, n0) -> float:
    """Mass of ages >= sigma, checking normalization of n0."""
    if isinstance(n0, DensityField):
        if np.any(n0.values < 0):
            raise ConfigError("density has negative values")
        mass = n0.mass
        tail = n0.firing_mass
    else:
        mass = integrate(n0, 0.0, math.inf)
        tail = integrate(n0, model.sigma, math.inf)
    if abs(mass - 1.0) > 1e-8:
        raise ConfigError(f"initial density is not normalized (mass {mass:.12g})")
    return float(tail)


def branch_roots(model: FiringModel, tail: float, resolution: int = 4096) -> tuple:
    if tail <= 0:
        return (0.0,)

    def f(u):
        return u - model.phi(u) * tail

    roots = scan_roots(f, 0.0, model.p_hi, resolution)
    return tuple(roots)


def initial_activities(model: FiringModel, n0: Union[DensityField, object],
                       resolution: int = 4096) -> InitialBranchSet:
    """All N0 with N0 = phi(N0) * int_sigma^inf n0."""
    tail = tail_mass(model, n0)
    return InitialBranchSet(branch_roots(model, tail, resolution), tail)
