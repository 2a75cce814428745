"""Upwind scheme for the age-structured equation with the nonlinear boundary.

dt = ds, so transport is an exact shift of the cell array.  During the step
from t_k to t_{k+1} the cells of age >= sigma fire at rate phi(N_k), the
discharged mass enters cell 0, and N_{k+1} is then read off the new field
from psi(N) = (mass of ages >= sigma).  Mass is conserved to round-off.
"""
from __future__ import annotations

import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from .activity import ActivityTrace, BranchPolicy, LevelSolver, LevelStep, TraceBuilder
from .errors import ConfigError, SolverError
from .grid import AgeGrid, DensityField, init_density
from .model import FiringModel
from .steady import initial_activities


def _solver_for(model, policy, solver):
    return solver if solver is not None else LevelSolver(model, policy)


def boundary_activity(field: DensityField, model: FiringModel, seed: float,
                      policy: Optional[BranchPolicy] = None,
                      solver: Optional[LevelSolver] = None) -> Tuple[float, bool]:
    """Solve N = phi(N) * (mass of ages >= sigma) continuing from ``seed``."""
    step = _solver_for(model, policy, solver).solve(field.firing_mass, seed)
    return step.N, step.jumped


def _decay(model, N, dt, exp_decay):
    rate = float(model.phi(N))
    return math.exp(-dt * rate) if exp_decay else 1.0 - dt * rate


def _advance(values: np.ndarray, K: int, inflow: float, q: float):
    """Shift one cell, lump the open last cell, decay the firing cells, inject."""
    last = values[-1]
    values[1:] = values[:-1]
    values[-1] += last
    values[K + 1:] *= q
    values[0] = inflow


def step_pde(field: DensityField, model: FiringModel, N_prev: float,
             policy: Optional[BranchPolicy] = None, exp_decay: bool = False,
             solver: Optional[LevelSolver] = None) -> Tuple[DensityField, float]:
    """One time step.  ``N_prev`` must be the activity of ``field``.

    Returns the advanced field and its activity.  With the default explicit
    decay the injected mass dt*N_prev equals the discharged mass exactly;
    ``exp_decay`` switches to the factor exp(-dt*phi), which no longer
    matches the injected mass, so mass then drifts at first order in dt.
    """
    grid = field.grid
    _check_cfl(model, grid)
    new = field.copy()
    q = _decay(model, N_prev, grid.dt, exp_decay)
    _advance(new.values, grid.K, N_prev, q)
    new.time = field.time + grid.dt
    step = _solver_for(model, policy, solver).solve(new.firing_mass, N_prev)
    return new, step.N


def _check_cfl(model, grid):
    if grid.dt * model.p_hi >= 1:
        raise ConfigError(f"dt*p_hi = {grid.dt * model.p_hi:.3g} >= 1 would make "
                          "densities negative")


def run_pde(model: FiringModel, n0, grid: Optional[AgeGrid] = None, T: float = None,
            policy: Optional[BranchPolicy] = None, snapshot_every: int = 0,
            exp_decay: bool = False, activity: Optional[Callable] = None,
            ) -> Tuple[ActivityTrace, List[DensityField]]:
    """Iterate the scheme on [0, T].

    With ``activity`` given, the boundary value is prescribed instead of
    solved (the linear problem): cell 0 at t_k receives activity(t_k).
    Snapshots are taken every ``snapshot_every`` steps (0 disables them,
    except for the initial and final fields).
    """
    policy = policy or BranchPolicy()
    grid = grid or AgeGrid.for_model(model)
    if abs(grid.sigma - model.sigma) > 1e-12:
        raise ConfigError("grid and model disagree on sigma")
    _check_cfl(model, grid)
    if T is None:
        T = 50 * model.sigma
    field = n0.copy() if isinstance(n0, DensityField) else init_density(n0, grid)
    dt, K = grid.dt, grid.K
    n_steps = int(round(T / dt))
    solver = LevelSolver(model, policy)
    tb = TraceBuilder(model, dt, n_steps)
    masses = np.empty(n_steps + 1)
    snaps = []
    v = field.values

    if activity is None:
        ib = initial_activities(model, field)
        N = policy.resolve_seed(model, ib.roots, ib.tail_mass)
    else:
        N = float(activity(0.0))
    tb.record(0, LevelStep(N, solver.piece_of(N), False), field.firing_mass)
    masses[0] = field.mass
    snaps.append(field.copy())

    for k in range(n_steps):
        q = _decay(model, N, dt, exp_decay)
        inflow = N if activity is None else float(activity((k + 1) * dt))
        _advance(v, K, inflow, q)
        level = dt * v[K:].sum()
        if activity is not None:
            step = LevelStep(inflow, solver.piece_of(inflow), False)
        else:
            try:
                step = solver.solve(level, N, level + (level - tb.levels[k]))
            except SolverError as exc:
                raise type(exc)(str(exc), time=(k + 1) * dt) from None
        N = step.N
        tb.record(k + 1, step, level)
        masses[k + 1] = dt * v.sum()
        field.time = (k + 1) * dt
        if snapshot_every and (k + 1) % snapshot_every == 0 or k + 1 == n_steps:
            snaps.append(field.copy())
    trace = tb.finish(route="pde", sigma=model.sigma, masses=masses,
                      max_mass_drift=float(np.max(np.abs(masses - 1.0))))
    return trace, snaps
