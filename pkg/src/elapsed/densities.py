"""Catalog of initial age densities n0 (all normalized to unit mass)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError


@dataclass(frozen=True)
class InitialDensity:
    func: Callable
    breaks: tuple = ()
    name: str = "custom"
    params: tuple = ()

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))

    def integrate(self, a: float, b: float) -> float:
        """Integral over [a, b] (b may be inf), split at known kinks."""
        if b <= a:
            return 0.0
        pts = [a] + [x for x in self.breaks if a < x < b] + [b]
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += quad(self.func, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
        return total


def integrate(n0: Callable, a: float, b: float) -> float:
    if isinstance(n0, InitialDensity):
        return n0.integrate(a, b)
    return quad(n0, a, b, limit=400, epsabs=1e-14, epsrel=1e-13)[0] if b > a else 0.0


def _exponential(rate):
    if rate <= 0:
        raise ConfigError("exponential rate must be positive")
    return lambda s: rate * np.exp(-rate * s), ()


def _shifted_exp(a):
    # e^{-(s-a)} on s > a, zero before
    if a < 0:
        raise ConfigError("shift must be nonnegative")
    return lambda s: np.where(s > a, np.exp(-(s - a)), 0.0), (a,)


def _plateau_exp(a):
    # constant up to a, then unit-rate exponential decay; mass a + 1
    if a < 0:
        raise ConfigError("plateau length must be nonnegative")
    c = 1.0 / (a + 1.0)
    return lambda s: c * np.exp(-np.maximum(s - a, 0.0)), (a,)


def _cosine_exp(omega):
    c = 1.0 / (1.0 + 1.0 / (1.0 + omega**2))
    return lambda s: c * (1.0 + np.cos(omega * s)) * np.exp(-s), ()


DENSITY_CATALOG = {
    "exponential": (_exponential, 1),
    "shifted_exp": (_shifted_exp, 1),
    "plateau_exp": (_plateau_exp, 1),
    "cosine_exp": (_cosine_exp, 1),
}


def builtin_density(name: str, params: Sequence[float]) -> InitialDensity:
    if name not in DENSITY_CATALOG:
        raise ConfigError(f"unknown initial density {name!r}; known: {sorted(DENSITY_CATALOG)}")
    factory, nparams = DENSITY_CATALOG[name]
    params = tuple(float(p) for p in params)
    if len(params) != nparams:
        raise ConfigError(f"density {name!r} takes {nparams} parameters, got {len(params)}")
    func, breaks = factory(*params)
    dens = InitialDensity(func, breaks, name, params)
    mass = dens.integrate(0.0, math.inf)
    if abs(mass - 1.0) > 1e-8:
        raise ConfigError(f"density {name!r} has mass {mass}, expected 1")
    return dens
