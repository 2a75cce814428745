"""Age grids and discretized densities n(t, .).

Cell j covers ages [j*ds, (j+1)*ds); the last cell is open-ended and holds
all mass of age >= s_max - ds.  Beyond sigma the hazard does not depend on
age, so lumping that tail into one absorbing cell is exact for the scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .densities import integrate
from .errors import ConfigError
from .model import FiringModel


def steps_per_delay(sigma: float, dt: float) -> int:
    """sigma / dt as an integer, or ConfigError if it is not one."""
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    k = int(round(sigma / dt))
    if k < 1 or abs(k * dt - sigma) > 1e-9 * sigma:
        raise ConfigError(f"sigma/dt must be a positive integer (sigma={sigma}, dt={dt})")
    return k


def default_smax(model: FiringModel) -> float:
    # 20/p_lo is what plain truncation would need; the lumped last cell makes
    # the tail exact, so the cap only limits the size of snapshot files.
    return model.sigma + min(20.0 / model.p_lo, max(20.0 * model.sigma, 10.0))


@dataclass(frozen=True)
class AgeGrid:
    sigma: float
    dt: float
    s_max: float

    def __post_init__(self):
        steps_per_delay(self.sigma, self.dt)
        if self.s_max < self.sigma + 2 * self.dt:
            raise ConfigError("s_max must exceed sigma by at least two cells")

    @property
    def ds(self) -> float:
        return self.dt

    @property
    def K(self) -> int:
        return steps_per_delay(self.sigma, self.dt)

    @property
    def n_cells(self) -> int:
        return int(np.ceil(self.s_max / self.ds - 1e-9))

    @property
    def edges(self) -> np.ndarray:
        return self.ds * np.arange(self.n_cells)

    @classmethod
    def for_model(cls, model: FiringModel, dt: Optional[float] = None,
                  s_max: Optional[float] = None) -> "AgeGrid":
        dt = model.sigma / 200 if dt is None else dt
        return cls(model.sigma, dt, default_smax(model) if s_max is None else s_max)


@dataclass
class DensityField:
    grid: AgeGrid
    values: np.ndarray
    time: float = 0.0
    norm_factor: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def mass(self) -> float:
        return float(self.grid.ds * self.values.sum())

    @property
    def firing_mass(self) -> float:
        """Mass of ages >= sigma, the pool that can discharge."""
        return float(self.grid.ds * self.values[self.grid.K:].sum())

    def copy(self) -> "DensityField":
        return DensityField(self.grid, self.values.copy(), self.time,
                            self.norm_factor, dict(self.meta))

    def to_csv(self) -> str:
        rows = ["s,n"]
        for s, n in zip(self.grid.edges, self.values):
            rows.append(f"{s:.12g},{n:.12g}")
        return "\n".join(rows) + "\n"


def init_density(n0: Callable, grid: AgeGrid, normalize: bool = True) -> DensityField:
    """Sample n0 at cell centres; the open last cell gets the exact tail."""
    edges = grid.edges
    centers = edges[:-1] + 0.5 * grid.ds
    vals = np.empty(grid.n_cells)
    vals[:-1] = np.asarray(n0(centers), dtype=float)
    tail = integrate(n0, edges[-1], np.inf)
    vals[-1] = tail / grid.ds
    if np.any(vals < 0):
        raise ConfigError("initial density has negative samples")
    mass = grid.ds * vals.sum()
    if not mass > 0:
        raise ConfigError("initial density has zero mass")
    factor = 1.0 / mass if normalize else 1.0
    return DensityField(grid, vals * factor, 0.0, factor)
