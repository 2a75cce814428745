"""Activity evolution through the integral (delay) form of the model.

With K = sigma/dt, the activity on the grid t_k = k*dt satisfies

    psi(N_k) = 1 - dt * sum_{i=k-K}^{k-1} N_i                  (k >= K)
    psi(N_k) = 1 - dt * sum_{i=0}^{k-1} N_i - int_0^{sigma-t_k} n0   (k < K)

i.e. left-rectangle quadrature of the past window.  The right-hand side
is explicit, so each step is a scalar level-set problem psi(N) = level.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .densities import integrate
from .errors import (AmbiguousBranch, BranchLost, ConfigError, LevelUnsolvable,
                     RegionExit, SolverError)
from .grid import DensityField, steps_per_delay
from .model import FiringModel, psi_eval, psi_pieces
from .steady import initial_activities, steady_states

MODES = ("continuation_then_jump", "fixed_branch", "fail_on_ambiguity")


@dataclass(frozen=True)
class BranchPolicy:
    mode: str = "continuation_then_jump"
    seed: Union[int, float] = 1      # 1-based branch index, or an explicit N(0)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown policy mode {self.mode!r}; known: {MODES}")
        if isinstance(self.seed, bool):
            raise ConfigError("seed must be an index or a value")

    def resolve_seed(self, model: FiringModel, roots: Sequence[float], tail: float) -> float:
        if isinstance(self.seed, (int, np.integer)):
            if not 1 <= self.seed <= len(roots):
                raise ConfigError(f"branch {self.seed} requested but only {len(roots)} "
                                  f"initial activities exist: {list(roots)}")
            return float(roots[self.seed - 1])
        val = float(self.seed)
        res = abs(val - float(model.phi(val)) * tail)
        if res > 1e-8:
            raise ConfigError(f"explicit seed {val} does not satisfy N = phi(N)*tail "
                              f"(residual {res:.3g}); admissible values: {list(roots)}")
        return val


@dataclass(frozen=True)
class LevelStep:
    N: float
    branch: int
    jumped: bool
    fold: Optional[float] = None       # where the old branch ended
    landing: Optional[float] = None    # psi-preserving partner of the fold
    flagged: bool = False              # root sits at a tangency of psi


class LevelSolver:
    """Solves psi(N) = level with branch continuation and jumps.

    Branches are the monotone pieces of psi on [0, p_hi].  A root is first
    sought on the piece holding the seed; only when that piece no longer
    attains the level does the solver jump.  The jump target is a root on
    another piece whose level set is still reachable at ``probe`` (a guess
    of the next level), the smallest one if several qualify.
    """

    def __init__(self, model: FiringModel, policy: Optional[BranchPolicy] = None):
        self.model = model
        self.policy = policy or BranchPolicy()
        self.pieces = psi_pieces(model)
        self.psi = lambda u: u / float(model.phi(u))
        self._ends = [(self.psi(p.lo), self.psi(p.hi)) for p in self.pieces]
        lo = min(min(e) for e in self._ends)
        hi = max(max(e) for e in self._ends)
        self.range = (lo, hi)

    def piece_of(self, u: float) -> int:
        for i, p in enumerate(self.pieces):
            if p.lo <= u <= p.hi:
                return i
        return 0 if u < self.pieces[0].lo else len(self.pieces) - 1

    def _root_on(self, i: int, level: float, seed: Optional[float] = None):
        p = self.pieces[i]
        a, b = self._ends[i]
        tol = 1e-13 * max(1.0, abs(level))
        if p.direction == 0:
            if abs(level - a) <= tol:
                return seed if (seed is not None and p.lo <= seed <= p.hi) else p.lo
            return None
        fa, fb = a - level, b - level
        if abs(fa) <= tol:
            return p.lo
        if abs(fb) <= tol:
            return p.hi
        if fa * fb > 0:
            return None
        return brentq(lambda u: self.psi(u) - level, p.lo, p.hi, xtol=1e-15, rtol=1e-15)

    def roots(self, level: float) -> list:
        out = []
        for i in range(len(self.pieces)):
            r = self._root_on(i, level)
            if r is not None and not any(abs(r - x) < 1e-12 for _, x in out):
                out.append((i, r))
        return out

    def solve(self, level: float, seed: float, probe: Optional[float] = None) -> LevelStep:
        if level < 0:
            raise LevelUnsolvable(f"negative level {level}")
        here = [i for i, p in enumerate(self.pieces) if p.lo <= seed <= p.hi]
        if not here:
            here = [self.piece_of(seed)]
        hits = [(i, self._root_on(i, level, seed)) for i in here]
        hits = [(i, r) for i, r in hits if r is not None]
        if hits:
            i, r = min(hits, key=lambda h: abs(h[1] - seed))
            return LevelStep(float(r), i, False, flagged=self._at_fold(r))
        if self.policy.mode == "fixed_branch":
            raise BranchLost(f"level {level:.6g} left the range of branch {here[0]}")
        cands = [(i, r) for i, r in self.roots(level) if i not in here]
        if not cands:
            raise LevelUnsolvable(
                f"psi(N) = {level:.6g} has no root on [0, p_hi]; psi ranges over "
                f"[{self.range[0]:.6g}, {self.range[1]:.6g}]")
        if probe is not None:
            alive = [c for c in cands if self._root_on(c[0], probe) is not None]
            cands = alive or cands
        if self.policy.mode == "fail_on_ambiguity" and len(cands) > 1:
            raise AmbiguousBranch(f"jump at level {level:.6g} has {len(cands)} targets: "
                                  f"{[r for _, r in cands]}")
        i, r = min(cands, key=lambda c: c[1])
        fold, landing = self._fold_pair(here[0], level, i)
        return LevelStep(float(r), i, True, fold, landing)

    def _at_fold(self, r):
        return any(abs(r - p.lo) < 1e-12 or abs(r - p.hi) < 1e-12 for p in self.pieces[1:])

    def _fold_pair(self, old: int, level: float, new: int):
        """End of the abandoned piece facing the level, and its partner on the new one."""
        p = self.pieces[old]
        a, b = self._ends[old]
        fold = (p.lo if a > b else p.hi) if level > max(a, b) else (p.lo if a < b else p.hi)
        target = self.psi(fold)
        landing = self._root_on(new, target)
        if landing is None:
            # the new piece does not reach the fold level exactly; take its closest end
            q = self.pieces[new]
            landing = min((q.lo, q.hi), key=lambda u: abs(self.psi(u) - target))
        return float(fold), float(landing)


def solve_psi_level(model: FiringModel, level: float, seed: float,
                    policy: Optional[BranchPolicy] = None):
    """Root of psi(N) = level continued from ``seed``; returns (N, branch_id, jumped)."""
    step = LevelSolver(model, policy).solve(level, seed)
    return step.N, step.branch, step.jumped


@dataclass
class ActivityTrace:
    dt: float
    times: np.ndarray
    values: np.ndarray
    psi_values: np.ndarray
    branch_ids: np.ndarray
    jumps: list = field(default_factory=list)      # (t, N_before, N_after)
    jump_steps: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def jump_flags(self) -> np.ndarray:
        flags = np.zeros(len(self.times), dtype=int)
        flags[list(self.jump_steps)] = 1
        return flags

    def to_csv(self) -> str:
        rows = ["t,N,psiN,branch,jump"]
        flags = self.jump_flags
        for t, n, p, b, j in zip(self.times, self.values, self.psi_values,
                                 self.branch_ids, flags):
            rows.append(f"{t:.12g},{n:.12g},{p:.12g},{int(b)},{int(j)}")
        return "\n".join(rows) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "ActivityTrace":
        data = np.loadtxt(text.splitlines()[1:], delimiter=",", ndmin=2)
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
        steps = [int(i) for i in np.flatnonzero(data[:, 4])]
        return cls(dt, t, data[:, 1], data[:, 2], data[:, 3].astype(int), [], steps)

    def window_residual(self, sigma: float, rule: str = "trapezoid") -> np.ndarray:
        """|int_{t-sigma}^t N + psi(N(t)) - 1| for every t_k > sigma."""
        K = steps_per_delay(sigma, self.dt)
        N = self.values
        c = np.concatenate([[0.0], np.cumsum(N)])
        idx = np.arange(K + 1, len(N))
        if rule == "rectangle":
            win = self.dt * (c[idx] - c[idx - K])
        else:
            win = self.dt * (c[idx + 1] - c[idx - K] - 0.5 * (N[idx] + N[idx - K]))
        return np.abs(win + self.psi_values[idx] - 1.0)


class TraceBuilder:
    """Accumulates a trace step by step, turning level-solver jumps into records."""

    def __init__(self, model, dt, n_steps):
        self.model = model
        self.dt = dt
        self.values = np.zeros(n_steps + 1)
        self.branches = np.zeros(n_steps + 1, dtype=int)
        self.levels = np.zeros(n_steps + 1)
        self.jumps, self.jump_steps, self.flags = [], [], []

    def record(self, k, step: LevelStep, level):
        self.values[k] = step.N
        self.branches[k] = step.branch
        self.levels[k] = level
        if step.flagged:
            self.flags.append(k)
        if step.jumped:
            prev = self.levels[k - 1] if k > 0 else level
            psi_fold = float(psi_eval(self.model, step.fold))
            frac = 0.0 if level == prev else (psi_fold - prev) / (level - prev)
            t_jump = (k - 1 + min(max(frac, 0.0), 1.0)) * self.dt
            self.jumps.append((t_jump, step.fold, step.landing))
            self.jump_steps.append(k)

    def finish(self, **meta) -> ActivityTrace:
        n = len(self.values)
        times = self.dt * np.arange(n)
        meta.setdefault("tangent_steps", self.flags)
        return ActivityTrace(self.dt, times, self.values.copy(),
                             np.asarray(psi_eval(self.model, self.values)),
                             self.branches.copy(), self.jumps, self.jump_steps, meta)


def _initial_cumulative(model, n0, dt, K):
    """F[m] = int_0^{m dt} n0 for m = 0..K, and the tail mass beyond sigma."""
    if isinstance(n0, DensityField):
        if abs(n0.grid.ds - dt) > 1e-12 * dt or n0.grid.K != K:
            raise ConfigError("density grid does not match dt")
        cells = n0.grid.ds * n0.values
        F = np.concatenate([[0.0], np.cumsum(cells[:K])])
        return F
    F = np.zeros(K + 1)
    for m in range(K):
        F[m + 1] = F[m] + integrate(n0, m * dt, (m + 1) * dt)
    return F


def evolve_activity(model: FiringModel, n0, T: float, dt: Optional[float] = None,
                    policy: Optional[BranchPolicy] = None,
                    history: Optional[Sequence[float]] = None) -> ActivityTrace:
    """March the integral equation for N on [0, T].

    ``n0`` is either a normalized callable density or a DensityField whose
    grid step equals dt.  Alternatively ``history`` gives N on [0, sigma]
    (K+1 samples) and the march starts at t = sigma + dt.
    """
    policy = policy or BranchPolicy()
    dt = model.sigma / 200 if dt is None else dt
    K = steps_per_delay(model.sigma, dt)
    n_steps = int(round(T / dt))
    solver = LevelSolver(model, policy)
    tb = TraceBuilder(model, dt, n_steps)
    N = tb.values

    if history is not None:
        hist = np.asarray(history, dtype=float)
        if len(hist) != K + 1:
            raise ConfigError(f"history needs {K + 1} samples on [0, sigma]")
        for k, v in enumerate(hist[: n_steps + 1]):
            tb.record(k, LevelStep(float(v), solver.piece_of(v), False),
                      float(psi_eval(model, v)))
        start = K + 1
        F = None
    else:
        ib = initial_activities(model, n0)
        N0 = policy.resolve_seed(model, ib.roots, ib.tail_mass)
        tb.record(0, LevelStep(N0, solver.piece_of(N0), False), ib.tail_mass)
        F = _initial_cumulative(model, n0, dt, K)
        start = 1

    prefix = np.zeros(n_steps + 2)      # prefix[k] = sum of N_0..N_{k-1}
    prefix[1:start + 1] = np.cumsum(N[:start])
    for k in range(start, n_steps + 1):
        if k >= K:
            level = 1.0 - dt * (prefix[k] - prefix[k - K])
        else:
            level = 1.0 - dt * prefix[k] - F[K - k]
        prev = tb.levels[k - 1]
        probe = level + (level - prev)
        try:
            step = solver.solve(level, N[k - 1], probe)
        except SolverError as exc:
            raise type(exc)(str(exc), time=k * dt) from None
        tb.record(k, step, level)
        prefix[k + 1] = prefix[k] + step.N
    return tb.finish(route="delay", sigma=model.sigma)


# ----------------------------------------------------------- monotone route

def ramp_history(model: FiringModel, N_start: float, dt: Optional[float] = None) -> np.ndarray:
    """Linear history from N_start with the end value fixed by unit mass.

    The end value N_end solves sigma*(N_start + N_end)/2 + psi(N_end) = 1 and
    is searched on the monotone piece of psi containing N_start.
    """
    dt = model.sigma / 200 if dt is None else dt
    K = steps_per_delay(model.sigma, dt)
    sigma = model.sigma
    piece = psi_pieces(model)[LevelSolver(model).piece_of(N_start)]
    h = lambda e: sigma * (N_start + e) / 2 + float(psi_eval(model, e)) - 1.0
    grid = np.linspace(piece.lo, piece.hi, 2001)
    vals = np.array([h(e) for e in grid])
    roots = [brentq(h, grid[i], grid[i + 1], xtol=1e-15)
             for i in range(len(grid) - 1) if vals[i] * vals[i + 1] < 0]
    if not roots:
        raise ConfigError(f"no mass-consistent ramp from N={N_start} on its branch")
    N_end = min(roots, key=lambda e: abs(e - N_start))
    return N_start + (N_end - N_start) * np.arange(K + 1) / K


def check_monotone_history(model: FiringModel, hist: np.ndarray, dt: float,
                           tol: float = 1e-8):
    sigma = model.sigma
    mass = float(trapezoid(hist, dx=dt)) + float(psi_eval(model, hist[-1]))
    if abs(mass - 1.0) > tol:
        raise ConfigError(f"history violates int_0^sigma N + psi(N(sigma)) = 1 "
                          f"(off by {mass - 1.0:.3g})")
    stars = [r for r in steady_states(model).values]
    end = hist[-1]
    if np.all(hist[:-1] < end):
        above = [s for s in stars if s > end]
        if not above:
            raise ConfigError("no steady state above the increasing history")
        return min(above), 1
    if np.all(hist[:-1] > end):
        below = [s for s in stars if s < end]
        if not below:
            raise ConfigError("no steady state below the decreasing history")
        return max(below), -1
    raise ConfigError("history must satisfy N(t) < N(sigma) (or >) for all t < sigma")


def evolve_monotone(model: FiringModel, history, psi_region: tuple, T: float,
                    dt: Optional[float] = None) -> ActivityTrace:
    """Integrate d/dt psi(N) = N(t - sigma) - N(t) with explicit midpoint steps.

    The unknown is v = psi(N); after each stage v is inverted by bisection
    on ``psi_region``, an interval on which psi is strictly decreasing.
    """
    dt = model.sigma / 200 if dt is None else dt
    K = steps_per_delay(model.sigma, dt)
    if callable(history):
        hist = np.asarray([history(k * dt) for k in range(K + 1)], dtype=float)
    else:
        hist = np.asarray(history, dtype=float)
    if len(hist) != K + 1:
        raise ConfigError(f"history needs {K + 1} samples on [0, sigma]")
    a, b = map(float, psi_region)
    psi = lambda u: u / float(model.phi(u))
    u = np.linspace(a, b, 257)
    dpsi = np.diff([psi(x) for x in u])
    if not np.all(dpsi < 0):
        raise ConfigError(f"psi is not strictly decreasing on {psi_region}")
    if hist.min() < a or hist.max() > b:
        raise ConfigError("history leaves psi_region")
    star, direction = check_monotone_history(model, hist, dt)
    v_lo, v_hi = psi(b), psi(a)

    def invert(v, t):
        if not v_lo <= v <= v_hi:
            raise RegionExit(f"psi level {v:.6g} left the region [{v_lo:.6g}, {v_hi:.6g}]",
                             time=t)
        if v == v_lo:
            return b
        if v == v_hi:
            return a
        return brentq(lambda x: psi(x) - v, a, b, xtol=1e-15, rtol=1e-15)

    n_steps = int(round(T / dt))
    N = np.zeros(max(n_steps, K) + 1)
    N[: K + 1] = hist
    v = psi(hist[K])
    for k in range(K, n_steps):
        t = k * dt
        d0 = N[k - K]
        v_half = v + 0.5 * dt * (d0 - N[k])
        n_half = invert(v_half, t + 0.5 * dt)
        v = v + dt * (0.5 * (d0 + N[k - K + 1]) - n_half)
        N[k + 1] = invert(v, t + dt)
    N = N[: n_steps + 1]
    piece = LevelSolver(model).piece_of(0.5 * (a + b))
    times = dt * np.arange(len(N))
    return ActivityTrace(dt, times, N, np.asarray(psi_eval(model, N)),
                         np.full(len(N), piece), [], [],
                         {"route": "monotone", "sigma": model.sigma,
                          "target": star, "direction": direction})


def window_extrema(trace: ActivityTrace, sigma: float):
    """Max and min of N over each full window [k sigma, (k+1) sigma]."""
    K = steps_per_delay(sigma, trace.dt)
    n_win = (len(trace.values) - 1) // K
    if n_win < 2:
        raise ConfigError("trace must cover at least two windows")
    maxima, minima = [], []
    for k in range(n_win):
        w = trace.values[k * K: (k + 1) * K + 1]
        maxima.append(float(w.max()))
        minima.append(float(w.min()))
    return maxima, minima
