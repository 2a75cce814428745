"""Densities compatible with a prescribed activity, and solution checks.

``initial_from_activity`` turns a history N on [0, sigma] into an initial
density whose evolution reproduces that history.  ``density_from_periodic_activity``
evaluates the characteristics formula for a periodic activity.
``verify_solution`` checks psi(N) = pool mass and unit mass on snapshots.
"""
from __future__ import annotations

import json
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError
from .grid import AgeGrid, DensityField, default_smax, steps_per_delay
from .model import FiringModel, phi_eval, psi_eval


def _history_cells(history, sigma, dt, K):
    """Node samples N(t_j), j = 0..K, and integrals over [t_j, t_{j+1}]."""
    if callable(history):
        t = dt * np.arange(K + 1)
        nodes = np.asarray(history(t), dtype=float)
        if hasattr(history, "integral"):
            ints = np.array([history.integral(t[j], t[j + 1]) for j in range(K)])
        else:
            ints = np.array([quad(lambda u: float(history(u)), t[j], t[j + 1])[0]
                             for j in range(K)])
        return nodes, ints
    nodes = np.asarray(history, dtype=float)
    if len(nodes) != K + 1:
        raise ConfigError(f"history needs {K + 1} samples on [0, sigma], got {len(nodes)}")
    return nodes, 0.5 * dt * (nodes[1:] + nodes[:-1])


def initial_from_activity(model: FiringModel, history: Union[np.ndarray, Callable],
                          dt: Optional[float] = None, s_max: Optional[float] = None,
                          tol: float = 1e-8) -> DensityField:
    """Initial density whose activity on [0, sigma] is ``history``.

    On (0, sigma) the density is n~(s) = N(sigma - s) + (d/dt psi(N))(sigma - s),
    stored as cell averages: the derivative term integrates exactly to a
    difference of psi values.  Beyond sigma the tail decays geometrically at
    rate phi(N(0)) and carries mass psi(N(0)), so the boundary equation at
    t = 0 and unit mass both hold.
    """
    sigma = model.sigma
    if dt is None:
        dt = sigma / (len(history) - 1) if not callable(history) else sigma / 200
    K = steps_per_delay(sigma, dt)
    grid = AgeGrid(sigma, dt, default_smax(model) if s_max is None else s_max)
    nodes, ints = _history_cells(history, sigma, dt, K)
    if np.any(nodes < 0) or np.any(nodes > model.p_hi):
        raise ConfigError("history leaves [0, p_hi]")
    psi = np.asarray(psi_eval(model, nodes))
    cond = ints.sum() + psi[K] - 1.0
    if abs(cond) > tol:
        raise ConfigError(f"history violates the mass identity at sigma by {cond:.3g}")
    dpsi = np.diff(psi)
    big = np.max(np.abs(dpsi)) if K else 0.0
    if big > 2 * model.p_hi * dt:
        raise ConfigError(f"psi(N) jumps by {big:.3g} inside the history; only "
                          "histories with continuous psi(N) are supported")

    # cell j covers ages [j dt, (j+1) dt), i.e. history times [sigma-(j+1)dt, sigma-j dt]
    head = (ints[::-1] + dpsi[::-1]) / dt
    if np.min(head) < -tol / dt:
        j = int(np.argmin(head))
        raise ConfigError(f"reconstructed density is negative ({head[j]:.3g}) at age "
                          f"{j * dt:.6g}")
    clipped = float(dt * np.sum(np.minimum(head, 0.0)))
    head = np.maximum(head, 0.0)

    J = grid.n_cells
    q = 1.0 - dt * float(phi_eval(model, nodes[0]))
    vals = np.empty(J)
    vals[:K] = head
    m = np.arange(J - K)
    vals[K:] = nodes[0] * q ** m
    vals[-1] = nodes[0] * q ** (J - 1 - K) / (1.0 - q)
    if clipped:
        tail = dt * vals[K:].sum()
        vals[K:] *= (tail + clipped) / tail
    return DensityField(grid, vals, meta={"N0": float(nodes[0]), "history_residual": cond})


def density_from_periodic_activity(model: FiringModel, profile,
                                   grid: Optional[AgeGrid] = None) -> DensityField:
    """n(0, s) = N(-s) exp(-int_{sigma-s}^0 phi(N(u)) du) on the age grid.

    The exponent is a trapezoid sum on the grid nodes.  Ages past the last
    cell are summed over whole periods in closed form (each period multiplies
    the density by the same factor) and lumped into the last cell.
    """
    grid = grid or AgeGrid.for_model(model, dt=profile.sigma / 200)
    dt, K, J = grid.dt, grid.K, grid.n_cells
    P = int(round(profile.period / dt))
    if abs(P * dt - profile.period) > 1e-9 * profile.period:
        raise ConfigError("profile period is not a multiple of dt")
    n_nodes = J - 1 + P
    u = -dt * np.arange(n_nodes)
    N = np.asarray(profile(u), dtype=float)
    rate = np.asarray(phi_eval(model, N), dtype=float)
    C = np.concatenate([[0.0], np.cumsum(0.5 * dt * (rate[1:] + rate[:-1]))])
    expo = np.zeros(n_nodes)
    expo[K:] = C[:n_nodes - K]
    nodes = N * np.exp(-expo)
    per_period = C[P] if P < len(C) else None
    if per_period is None:
        raise ConfigError("grid too short for one period")
    decay = np.exp(-per_period)
    vals = np.empty(J)
    vals[:J - 1] = nodes[:J - 1]
    vals[-1] = nodes[J - 1:J - 1 + P].sum() / (1.0 - decay)
    field = DensityField(grid, vals, meta={"profile_kind": profile.kind})
    field.meta["mass"] = field.mass
    return field


def verify_solution(snapshots: Sequence[DensityField], trace, model: FiringModel,
                    tol: float) -> dict:
    """Residuals of psi(N(t)) = int_sigma^inf n and int_0^inf n = 1 per snapshot."""
    psi_res, mass_res, times = [], [], []
    for snap in snapshots:
        k = int(round(snap.time / trace.dt))
        if k >= len(trace.values) or abs(k * trace.dt - snap.time) > 1e-9 * max(1.0, snap.time):
            raise ConfigError(f"snapshot at t = {snap.time} has no matching trace sample")
        psi_res.append(abs(float(psi_eval(model, trace.values[k])) - snap.firing_mass))
        mass_res.append(abs(snap.mass - 1.0))
        times.append(float(snap.time))
    mp = max(psi_res, default=0.0)
    mm = max(mass_res, default=0.0)
    return {"max_psi_residual": mp, "max_mass_residual": mm,
            "pass": bool(mp <= tol and mm <= tol), "tol": tol,
            "n_snapshots": len(times)}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
