"""Periodic activities: sigma-periodic square waves, linear-band profiles and
2*sigma-periodic piecewise-monotone solutions built by a contraction.

Every profile is a periodic function N(t) together with its window
integral int_{t-sigma}^t N, so the mass identity
int_{t-sigma}^t N + psi(N(t)) = 1 can be checked at arbitrary times.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.optimize import brentq, minimize_scalar

from .activity import LevelSolver
from .errors import ConfigError, ContractionFailure, RegionExit, VerificationError
from .grid import steps_per_delay
from .model import FiringModel, psi_eval, psi_pieces


class PiecewiseLinear:
    """Periodic function given by linear interpolation on consecutive pieces.

    Each piece is (t0, t1, ts, vs) with ts[0] = t0 and ts[-1] = t1; values at
    a piece boundary belong to the piece that starts there.
    """

    def __init__(self, period: float, pieces: Sequence[tuple]):
        self.period = period
        self.pieces = [(float(a), float(b), np.asarray(ts, float), np.asarray(vs, float))
                       for a, b, ts, vs in pieces]
        areas = [float(trapezoid(vs, ts)) for _, _, ts, vs in self.pieces]
        self._offsets = np.concatenate([[0.0], np.cumsum(areas)])
        self.total = float(self._offsets[-1])

    def _locate(self, tau):
        starts = np.array([p[0] for p in self.pieces])
        return np.clip(np.searchsorted(starts, tau, side="right") - 1, 0, len(starts) - 1)

    def _reduce(self, t):
        # times within round-off of a piece start belong to that piece
        tau = np.mod(t, self.period)
        eps = 1e-12 * self.period
        for s in [p[0] for p in self.pieces] + [self.period]:
            tau = np.where(np.abs(tau - s) <= eps, s % self.period, tau)
        return tau

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        tau = self._reduce(t)
        idx = self._locate(tau)
        out = np.empty_like(tau)
        for i, (_, _, ts, vs) in enumerate(self.pieces):
            m = idx == i
            if np.any(m):
                out[m] = np.interp(tau[m], ts, vs)
        return out if out.ndim else float(out)

    def antiderivative(self, t):
        """int_0^t N for any real t (periodic extension)."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        cycles = np.floor(t / self.period)
        tau = t - cycles * self.period
        idx = self._locate(tau)
        out = cycles * self.total
        for i, (t0, _, ts, vs) in enumerate(self.pieces):
            m = idx == i
            if not np.any(m):
                continue
            x = tau[m]
            j = np.clip(np.searchsorted(ts, x, side="right") - 1, 0, len(ts) - 2)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(ts) * (vs[1:] + vs[:-1]))])
            slope = (vs[j + 1] - vs[j]) / (ts[j + 1] - ts[j])
            h = x - ts[j]
            out[m] += self._offsets[i] + cum[j] + vs[j] * h + 0.5 * slope * h * h
        return float(out[0]) if scalar else out


@dataclass
class PeriodicProfile:
    kind: str
    period: float
    sigma: float
    dt: float
    times: np.ndarray
    samples: np.ndarray
    jump_points: list
    residual: float
    func: Callable
    window: Callable
    mass: float = 1.0
    meta: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.func(t)

    def window_integral(self, t):
        return self.window(t)

    def integral(self, a: float, b: float) -> float:
        """int_a^b N over the periodic extension."""
        if hasattr(self.func, "antiderivative"):
            return float(self.func.antiderivative(b) - self.func.antiderivative(a))
        P = self.period
        pts = sorted({float(j + k * P) for j in self.jump_points
                      for k in range(int(np.floor(a / P)) - 1, int(np.ceil(b / P)) + 2)
                      if a < j + k * P < b})
        return float(quad(lambda t: float(self.func(t)), a, b, points=pts or None,
                          limit=400, epsabs=1e-14)[0])

    def mass_residual(self, model: FiringModel, t, target: Optional[float] = None):
        target = self.mass if target is None else target
        n = np.asarray(self.func(t), dtype=float)
        return np.abs(self.window(t) + psi_eval(model, n) - target)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "period": self.period, "sigma": self.sigma,
               "dt": self.dt, "jump_points": [float(x) for x in self.jump_points],
               "residual": self.residual, "mass": self.mass}
        out.update({k: v for k, v in self.meta.items() if not isinstance(v, np.ndarray)})
        return out

    def to_csv(self, model: FiringModel) -> str:
        rows = ["t,N,psiN,branch,jump"]
        solver = LevelSolver(model)
        jumps = set(int(round(j / self.dt)) for j in self.jump_points
                    if abs(j / self.dt - round(j / self.dt)) < 1e-9)
        for k, (t, n) in enumerate(zip(self.times, self.samples)):
            rows.append(f"{t:.12g},{n:.12g},{psi_eval(model, n):.12g},"
                        f"{solver.piece_of(n)},{int(k in jumps)}")
        return "\n".join(rows) + "\n"


def _check_times(profile, model, n=1000):
    t = np.linspace(0.0, profile.period, n, endpoint=False) + 0.37 * profile.period / n
    return float(np.max(profile.mass_residual(model, t)))


# ------------------------------------------------------------- level sets

@dataclass(frozen=True)
class LevelPairs:
    level: float
    roots: tuple
    pairs: tuple
    band: Optional[tuple] = None


def psi_level_pairs(model: FiringModel, level: float) -> LevelPairs:
    """Ordered pairs of distinct roots of psi(N) = level.

    When psi equals the level on a whole interval the level set is a band;
    it is reported in ``band`` and no pairs are formed.
    """
    solver = LevelSolver(model)
    band = None
    for i, p in enumerate(solver.pieces):
        if p.direction == 0 and abs(solver._ends[i][0] - level) <= 1e-12 * max(1, level):
            band = (float(p.lo), float(p.hi))
    roots = tuple(r for _, r in solver.roots(level))
    if band is not None:
        return LevelPairs(level, roots, (), band)
    if len(roots) < 2:
        raise ConfigError(f"psi(N) = {level} has {len(roots)} root(s); need two")
    pairs = tuple((roots[i], roots[j]) for i in range(len(roots))
                  for j in range(i + 1, len(roots)))
    return LevelPairs(level, roots, pairs)


# ---------------------------------------------------- sigma-periodic kinds

def construct_piecewise_constant(model: FiringModel, N1: float, N2: float,
                                 n_samples: int = 400) -> PeriodicProfile:
    """N = N1 on [0, alpha), N2 on [alpha, sigma), with psi(N1) = psi(N2)."""
    sigma = model.sigma
    if N1 == N2:
        raise ConfigError("N1 and N2 must differ")
    p1, p2 = psi_eval(model, N1), psi_eval(model, N2)
    if abs(p1 - p2) > 1e-10:
        raise ConfigError(f"psi(N1) = {p1} and psi(N2) = {p2} differ")
    alpha = (sigma * N2 + p1 - 1.0) / (N2 - N1)
    if not 0 < alpha < sigma:
        raise ConfigError(f"alpha = {alpha:.6g} outside (0, sigma): the pair admits "
                          "no sigma-periodic solution")
    pl = PiecewiseLinear(sigma, [(0.0, alpha, [0.0, alpha], [N1, N1]),
                                 (alpha, sigma, [alpha, sigma], [N2, N2])])
    win_const = alpha * N1 + (sigma - alpha) * N2

    def window(t):
        return np.full_like(np.asarray(t, dtype=float), win_const)

    dt = sigma / n_samples
    times = dt * np.arange(n_samples)
    residual = max(abs(win_const + p1 - 1.0), abs(win_const + p2 - 1.0))
    return PeriodicProfile("piecewise_constant", sigma, sigma, dt, times, pl(times),
                           [0.0, alpha], residual, pl, window,
                           meta={"N1": N1, "N2": N2, "alpha": alpha})


def square_wave(sigma: float) -> Callable:
    """Zero-mean shape: +1 on the first half period, -1 on the second."""
    return lambda t: np.where(np.mod(t, sigma) < 0.5 * sigma, 1.0, -1.0)


def construct_linear_band(model: FiringModel, a: float, b: float, C: float,
                          shape: Callable, amplitude: Union[float, str] = "auto",
                          n_samples: int = 400, shape_breaks: Sequence[float] = ()
                          ) -> PeriodicProfile:
    """Continuous family around the band where phi(u) = C u (psi = 1/C)."""
    sigma = model.sigma
    if not C > 1:
        raise ConfigError("C must exceed 1")
    u = np.linspace(a, b, 513)
    if np.max(np.abs(model.phi(u) - C * u)) > 1e-10:
        raise ConfigError(f"phi(u) != {C} u on [{a}, {b}]")
    m = (1.0 - 1.0 / C) / sigma
    if not a * sigma < 1 - 1 / C < b * sigma:
        raise ConfigError(f"need a*sigma < 1 - 1/C < b*sigma, got "
                          f"{a * sigma:.6g}, {1 - 1 / C:.6g}, {b * sigma:.6g}")
    pts = sorted(x for x in shape_breaks if 0 < x < sigma) or None
    Z = quad(lambda t: float(shape(t)), 0.0, sigma, points=pts, limit=400,
             epsabs=1e-13)[0]
    if abs(Z) > 1e-10:
        raise ConfigError(f"shape must have zero mean over a period (integral {Z:.3g})")
    dense = np.linspace(0.0, sigma, 8001)
    sup = float(np.max(np.abs(shape(dense))))
    if amplitude == "auto":
        amplitude = 0.0 if sup == 0 else 0.9 * min(b - m, m - a) / sup
    amplitude = float(amplitude)
    lo, hi = m - abs(amplitude) * sup, m + abs(amplitude) * sup
    if lo < a - 1e-12 or hi > b + 1e-12:
        raise ConfigError(f"profile range [{lo:.6g}, {hi:.6g}] escapes [{a}, {b}]")

    def func(t):
        return m + amplitude * shape(np.asarray(t, dtype=float))

    def window(t):
        return np.full_like(np.asarray(t, dtype=float), sigma * m + amplitude * Z)

    dt = sigma / n_samples
    times = dt * np.arange(n_samples)
    prof = PeriodicProfile("linear_band", sigma, sigma, dt, times, func(times),
                           [x for x in sorted(shape_breaks) if 0 <= x < sigma], 0.0,
                           func, window,
                           meta={"a": a, "b": b, "C": C, "mean": m, "amplitude": amplitude})
    prof.residual = _check_times(prof, model)
    return prof


# --------------------------------------------------------- 2 sigma-periodic

@dataclass(frozen=True)
class MassFunctional:
    N_plus: float
    N_minus: float
    level: float
    Q_value: float


def _local_min(model, lo, hi):
    res = minimize_scalar(lambda u: float(psi_eval(model, u)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def _strictly_monotone(model, lo, hi, sign, n=400):
    v = psi_eval(model, np.linspace(lo, hi, n))
    d = np.diff(v)
    return np.all(d < 0) if sign < 0 else np.all(d > 0)


def _inverter(model, lo, hi):
    psi = lambda u: u / float(model.phi(u))
    p_lo, p_hi = psi(lo), psi(hi)
    vmin, vmax = min(p_lo, p_hi), max(p_lo, p_hi)

    def inv(v, t):
        if not vmin - 1e-14 <= v <= vmax + 1e-14:
            raise RegionExit(f"psi level {v:.8g} left [{vmin:.8g}, {vmax:.8g}]", time=t)
        v = min(max(v, vmin), vmax)
        if v == p_lo:
            return lo
        if v == p_hi:
            return hi
        return brentq(lambda u: psi(u) - v, lo, hi, xtol=1e-15, rtol=1e-15)

    return inv


def construct_two_sigma(model: FiringModel, N_plus: float, N_minus: float,
                        dt: Optional[float] = None, tol: float = 1e-12,
                        max_iter: int = 50) -> Tuple[PeriodicProfile, MassFunctional]:
    """Fixed point of T for anchors psi(N_minus) = psi(N_plus) around a local min of psi.

    One application of T: given N on [0, sigma] (from N_plus, decreasing),
    march M backward over (sigma, 2 sigma) from M(2 sigma) = N_minus and then
    L forward over (2 sigma, 3 sigma) from L(2 sigma) = N_plus; the new first
    half is L shifted back by 2 sigma.  Both marches are midpoint steps in
    v = psi(.), inverted on the monotone piece they live on.
    """
    sigma = model.sigma
    dt = sigma / 400 if dt is None else dt
    K = steps_per_delay(sigma, dt)
    level = float(psi_eval(model, N_plus))
    if abs(level - psi_eval(model, N_minus)) > 1e-10:
        raise ConfigError("anchors must share the psi level")
    if not N_minus < N_plus:
        raise ConfigError("need N_minus < N_plus")
    N_low = _local_min(model, N_minus, N_plus)
    if not (_strictly_monotone(model, N_minus, N_low, -1)
            and _strictly_monotone(model, N_low, N_plus, +1)):
        raise ConfigError("psi is not decreasing then increasing between the anchors")
    inv_dec = _inverter(model, N_minus, N_low)
    inv_inc = _inverter(model, N_low, N_plus)
    psi = lambda u: u / float(model.phi(u))

    # initial guess: linear decrease from N_plus, staying inside the basin
    v_end = level - 0.5 * sigma * (N_plus - N_minus)
    N_end = inv_inc(max(v_end, psi(N_low) + 0.5 * (level - psi(N_low))), 0.0)
    first = N_plus + (N_end - N_plus) * np.arange(K + 1) / K

    def apply_T(first):
        M = np.empty(K + 1)
        M[K] = N_minus
        v = level
        for i in range(K, 0, -1):
            t = sigma + i * dt
            v_mid = v - 0.5 * dt * (first[i] - M[i])
            m_mid = inv_dec(v_mid, t - 0.5 * dt)
            v = v - dt * (0.5 * (first[i] + first[i - 1]) - m_mid)
            M[i - 1] = inv_dec(v, t - dt)
        L = np.empty(K + 1)
        L[0] = N_plus
        v = level
        for i in range(K):
            t = 2 * sigma + i * dt
            v_mid = v + 0.5 * dt * (M[i] - L[i])
            l_mid = inv_inc(v_mid, t + 0.5 * dt)
            v = v + dt * (0.5 * (M[i] + M[i + 1]) - l_mid)
            L[i + 1] = inv_inc(v, t + dt)
        return M, L

    dists, ratios = [], []
    bad = 0
    for it in range(1, max_iter + 1):
        M, L = apply_T(first)
        d = float(np.max(np.abs(L - first)))
        first = L
        if dists and dists[-1] > 1e3 * tol:
            r = d / dists[-1]
            ratios.append(r)
            bad = bad + 1 if r >= 1 else 0
            if bad >= 3:
                raise ContractionFailure(f"iterate distances grow (ratio {r:.3g}); "
                                         "sigma too large for the contraction")
        dists.append(d)
        if d <= tol:
            break
    else:
        raise ContractionFailure(f"no convergence in {max_iter} iterations "
                                 f"(last distance {dists[-1]:.3g})")
    M, L = apply_T(first)
    image_dist = float(np.max(np.abs(L - first)))

    gap = abs(psi(first[K]) - psi(M[0]))
    if gap > 10 * dt:
        raise VerificationError(f"psi jumps by {gap:.3g} at t = sigma")
    if not (np.all(np.diff(first) < 0) and np.all(np.diff(M) < 0)):
        raise VerificationError("constructed profile is not decreasing on each half period")
    Q = level + float(trapezoid(M, dx=dt))

    times_a = dt * np.arange(K + 1)
    pl = PiecewiseLinear(2 * sigma, [(0.0, sigma, times_a, first),
                                     (sigma, 2 * sigma, sigma + times_a, M)])

    def window(t):
        t = np.asarray(t, dtype=float)
        return pl.antiderivative(t) - pl.antiderivative(t - sigma)

    times = dt * np.arange(2 * K)
    prof = PeriodicProfile(
        "two_sigma", 2 * sigma, sigma, dt, times, pl(times), [0.0, sigma], 0.0,
        pl, window, mass=Q,
        meta={"N_plus": N_plus, "N_minus": N_minus, "N_low": N_low, "level": level,
              "Q": Q, "iterations": it, "distances": dists,
              "contraction_ratio": max(ratios) if ratios else 0.0,
              "image_distance": image_dist, "psi_gap_at_sigma": gap})
    prof.residual = _check_times(prof, model)
    return prof, MassFunctional(N_plus, N_minus, level, Q)


def anchor_pair(model: FiringModel, level: float, N_low: float) -> Tuple[float, float]:
    """(N_minus, N_plus) at the given psi level on either side of the local min N_low."""
    pieces = psi_pieces(model)
    dec = [p for p in pieces if p.direction < 0 and abs(p.hi - N_low) < 1e-6]
    inc = [p for p in pieces if p.direction > 0 and abs(p.lo - N_low) < 1e-6]
    if not dec or not inc:
        raise ConfigError(f"N = {N_low} is not a local minimum between monotone pieces")
    psi = lambda u: float(psi_eval(model, u)) - level
    try:
        N_minus = brentq(psi, dec[0].lo, N_low, xtol=1e-15, rtol=1e-15)
        N_plus = brentq(psi, N_low, inc[0].hi, xtol=1e-15, rtol=1e-15)
    except ValueError:
        raise ConfigError(f"level {level} is not attained on both sides of {N_low}") from None
    return N_minus, N_plus


def calibrate_mass(model: FiringModel, bracket: Tuple[tuple, tuple],
                   dt: Optional[float] = None, tol: float = 1e-6,
                   max_iter: int = 100) -> PeriodicProfile:
    """Bisection on the anchor level until Q[N_plus] = 1 within ``tol``.

    ``bracket`` holds two anchor pairs (N_minus, N_plus) whose Q values
    straddle 1; intermediate pairs share the same local minimum of psi.
    """
    (m1, p1), (m2, p2) = bracket
    N_low = _local_min(model, min(m1, m2), max(p1, p2))
    # snap to the exact sign change of psi' used for the pieces
    cuts = [p.hi for p in psi_pieces(model) if p.direction < 0]
    N_low = min(cuts, key=lambda c: abs(c - N_low)) if cuts else N_low
    l1, l2 = float(psi_eval(model, p1)), float(psi_eval(model, p2))

    def build(level):
        nm, npl = anchor_pair(model, level, N_low)
        return construct_two_sigma(model, npl, nm, dt)

    prof1, q1 = build(l1)
    if abs(q1.Q_value - 1) <= tol:
        return _calibrated(prof1, 0)
    prof2, q2 = build(l2)
    if abs(q2.Q_value - 1) <= tol:
        return _calibrated(prof2, 0)
    f1, f2 = q1.Q_value - 1, q2.Q_value - 1
    if f1 * f2 > 0:
        raise ConfigError(f"bracket does not straddle Q = 1 (Q = {q1.Q_value:.6g}, "
                          f"{q2.Q_value:.6g})")
    lo, hi = (l1, l2) if f1 < 0 else (l2, l1)
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        prof, q = build(mid)
        f = q.Q_value - 1
        if abs(f) <= tol:
            return _calibrated(prof, it)
        if f < 0:
            lo = mid
        else:
            hi = mid
    raise ContractionFailure(f"mass calibration did not reach |Q-1| <= {tol}")


def _calibrated(prof, iterations):
    prof.meta["calibration_iterations"] = iterations
    prof.meta["calibrated"] = True
    return prof
