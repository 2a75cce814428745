"""Firing-rate models phi(u) with an absolute refractory period sigma.

The hazard of a neuron of age s under network activity u is
``phi(u) * 1{s > sigma}``.  Most of the dynamics is governed by the
function ``psi(u) = u / phi(u)`` and the sign pattern of its derivative.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DomainError

INHIBITORY = "Inhibitory"
WEAKLY_EXCITATORY = "WeaklyExcitatory"
STRONGLY_EXCITATORY = "StronglyExcitatory"

# |psi'| below this counts as a zero sign (flat bands of psi).
SIGN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class FiringModel:
    phi: Callable
    sigma: float
    p_lo: float
    p_hi: float
    derivative: Optional[Callable] = None
    name: str = "custom"
    params: tuple = ()
    kinks: tuple = ()

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not self.p_lo > 0:
            raise ConfigError(f"p_lo must be positive, got {self.p_lo}")
        if not self.p_hi >= self.p_lo:
            raise ConfigError("p_hi must be >= p_lo")
        u = np.linspace(0.0, self.p_hi, 1024)
        vals = np.asarray(self.phi(u), dtype=float)
        tol = 1e-12 * max(1.0, self.p_hi)
        if np.any(vals < self.p_lo - tol) or np.any(vals > self.p_hi + tol):
            raise ConfigError(
                f"phi leaves [p_lo, p_hi] = [{self.p_lo}, {self.p_hi}] on [0, p_hi]")

    def with_sigma(self, sigma: float) -> "FiringModel":
        return dataclasses.replace(self, sigma=float(sigma))

    def describe(self) -> dict:
        return {"name": self.name, "params": list(self.params), "sigma": self.sigma,
                "p_lo": self.p_lo, "p_hi": self.p_hi}


@dataclass(frozen=True)
class Regime:
    tag: str
    sign_changes: tuple = ()


@dataclass(frozen=True)
class Piece:
    """Maximal interval of [0, p_hi] on which psi is monotone (or flat)."""
    lo: float
    hi: float
    direction: int  # +1 increasing, -1 decreasing, 0 constant

    def contains(self, u, pad=0.0):
        return self.lo - pad <= u <= self.hi + pad


def _check_u(u):
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"activity must be nonnegative, got {u}")
    return arr


def phi_eval(model: FiringModel, u):
    arr = _check_u(u)
    val = np.asarray(model.phi(arr), dtype=float)
    tol = 1e-12 * max(1.0, model.p_hi)
    if np.any(val < model.p_lo - tol) or np.any(val > model.p_hi + tol):
        raise ConfigError(f"phi({u}) = {val} violates the declared bounds")
    return float(val) if val.ndim == 0 else val


def psi_eval(model: FiringModel, u):
    arr = _check_u(u)
    val = arr / np.asarray(model.phi(arr), dtype=float)
    return float(val) if val.ndim == 0 else val


def psi_prime(model: FiringModel, u: float, info: bool = False):
    """psi'(u) = (phi - u phi') / phi^2.

    Uses the analytic phi' when the model has one, otherwise a central
    difference (forward at u = 0).  With ``info=True`` a dict describing
    how the value was obtained is returned alongside it.
    """
    u = float(u)
    if u < 0 or u > model.p_hi * (1 + 1e-12):
        raise DomainError(f"psi_prime evaluated outside [0, p_hi]: u={u}")
    meta = {"finite_difference": False, "kink": False}
    for k in model.kinks:
        if abs(u - k) <= 1e-12 * max(1.0, abs(k)):
            meta["kink"] = True
    if model.derivative is not None:
        f = float(model.phi(u))
        val = (f - u * float(model.derivative(u))) / (f * f)
    else:
        meta["finite_difference"] = True
        val = _psi_prime_fd(model, u)
    return (val, meta) if info else val


def _psi_prime_fd(model, u):
    h = 1e-6 * max(1.0, u)
    psi = lambda x: x / float(model.phi(x))
    if u - h < 0:
        return (psi(u + h) - psi(u)) / h
    return (psi(u + h) - psi(u - h)) / (2 * h)


def _psi_prime_grid(model, u):
    u = np.asarray(u, dtype=float)
    f = np.asarray(model.phi(u), dtype=float)
    if model.derivative is not None:
        return (f - u * np.asarray(model.derivative(u), dtype=float)) / f**2
    return np.array([_psi_prime_fd(model, x) for x in u])


def _sign(x):
    return 0 if abs(x) <= SIGN_ZERO_TOL else (1 if x > 0 else -1)


def _locate_sign_change(model, a, b, width=1e-10):
    sa = _sign(psi_prime(model, a))
    while b - a > width:
        m = 0.5 * (a + b)
        if _sign(psi_prime(model, m)) == sa:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def classify_regime(model: FiringModel, samples: int = 1024) -> Regime:
    if samples < 64:
        raise ConfigError("classify_regime needs at least 64 samples")
    u = np.linspace(0.0, model.p_hi, samples + 1)[1:]
    f = np.asarray(model.phi(u), dtype=float)
    dp = _psi_prime_grid(model, u)
    signs = [_sign(x) for x in dp]
    changes = []
    for i in range(len(u) - 1):
        if signs[i] != signs[i + 1]:
            x = _locate_sign_change(model, u[i], u[i + 1])
            # a declared kink inside the bracket is the exact location
            near = [k for k in model.kinks if abs(k - x) <= 1e-9]
            changes.append(float(near[0] if near else x))
    if changes:
        return Regime(STRONGLY_EXCITATORY, tuple(changes))
    if np.all(np.diff(f) <= 1e-14 * max(1.0, model.p_hi)):
        return Regime(INHIBITORY)
    return Regime(WEAKLY_EXCITATORY)


@functools.lru_cache(maxsize=64)
def psi_pieces(model: FiringModel) -> tuple:
    """Split [0, p_hi] at the sign changes of psi'."""
    cuts = [0.0, *classify_regime(model).sign_changes, model.p_hi]
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        pieces.append(Piece(lo, hi, _sign(psi_prime(model, mid))))
    return tuple(pieces)


# ---------------------------------------------------------------- catalog

def _constant(c):
    if c <= 0:
        raise ConfigError("constant rate must be positive")
    return dict(phi=lambda u: np.full_like(np.asarray(u, dtype=float), c) + 0.0,
                derivative=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                p_lo=c, p_hi=c)


def _affine(a, b):
    # p_hi solves p = a + b p so that [0, p_hi] is mapped into itself
    if a <= 0 or not (-1 < b < 1):
        raise ConfigError("affine rate needs a > 0 and -1 < b < 1")
    p_hi = a / (1 - b) if b >= 0 else a
    p_lo = a if b >= 0 else a + b * p_hi
    if p_lo <= 0:
        raise ConfigError("affine rate parameters yield p_lo <= 0")
    return dict(phi=lambda u: a + b * np.asarray(u, dtype=float),
                derivative=lambda u: np.full_like(np.asarray(u, dtype=float), b) + 0.0,
                p_lo=p_lo, p_hi=p_hi)


def _sigmoid(a, b):
    def phi(u):
        return 1.0 / (1.0 + np.exp(-a * np.asarray(u, dtype=float) + b))

    def dphi(u):
        f = phi(u)
        return a * f * (1 - f)

    if a >= 0:
        p_hi = 1.0
        p_lo = float(phi(0.0))
    else:
        p_hi = float(phi(0.0))
        p_lo = float(phi(p_hi))
    return dict(phi=phi, derivative=dphi, p_lo=p_lo, p_hi=p_hi)


def _clamped_linear(slope, floor, cap):
    if not (slope > 0 and 0 < floor < cap):
        raise ConfigError("clamped_linear needs slope > 0 and 0 < floor < cap")

    def phi(u):
        return np.maximum(np.minimum(slope * np.asarray(u, dtype=float), cap), floor)

    def dphi(u):
        # right-continuous derivative, so kinks take the right-hand value
        su = slope * np.asarray(u, dtype=float)
        return np.where((su >= floor) & (su < cap), slope, 0.0)

    return dict(phi=phi, derivative=dphi, p_lo=floor, p_hi=cap,
                kinks=(floor / slope, cap / slope))


def _rational_shift(a, c):
    if a < 0 or c <= 0:
        raise ConfigError("rational_shift needs a >= 0 and c > 0")

    def phi(u):
        u = np.asarray(u, dtype=float)
        return a * u**2 / (u**2 + 1) + c

    def dphi(u):
        u = np.asarray(u, dtype=float)
        return 2 * a * u / (u**2 + 1) ** 2

    return dict(phi=phi, derivative=dphi, p_lo=c, p_hi=a + c)


def _double_gaussian(a1, m1, a2, m2):
    if a1 < 0 or a2 < 0 or a1 + a2 <= 0:
        raise ConfigError("double_gaussian amplitudes must be nonnegative")

    def phi(u):
        u = np.asarray(u, dtype=float)
        return a1 * np.exp(-(u - m1) ** 2) + a2 * np.exp(-(u - m2) ** 2)

    def dphi(u):
        u = np.asarray(u, dtype=float)
        return (-2 * (u - m1) * a1 * np.exp(-(u - m1) ** 2)
                - 2 * (u - m2) * a2 * np.exp(-(u - m2) ** 2))

    p_hi = _extremum(phi, 0.0, max(m1, m2, 0.0) + 10.0, maximize=True)
    p_lo = _extremum(phi, 0.0, p_hi, maximize=False)
    return dict(phi=phi, derivative=dphi, p_lo=p_lo, p_hi=p_hi)


def _extremum(f, a, b, maximize):
    """Global extremum of a smooth scalar map on [a, b]: grid, then refine."""
    sgn = -1.0 if maximize else 1.0
    x = np.linspace(a, b, 4001)
    y = sgn * np.asarray(f(x), dtype=float)
    i = int(np.argmin(y))
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, len(x) - 1)]
    res = minimize_scalar(lambda t: sgn * float(f(t)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-13})
    best = min(y[i], res.fun)
    return float(sgn * best)


CATALOG = {
    "constant": (_constant, 1),
    "affine": (_affine, 2),
    "sigmoid": (_sigmoid, 2),
    "clamped_linear": (_clamped_linear, 3),
    "rational_shift": (_rational_shift, 2),
    "double_gaussian": (_double_gaussian, 4),
}


def builtin_model(name: str, params: Sequence[float], sigma: float = 1.0) -> FiringModel:
    """Build a catalog model, e.g. ``builtin_model("sigmoid", (9, 3.5), 0.5)``."""
    if name not in CATALOG:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(CATALOG)}")
    factory, nparams = CATALOG[name]
    params = tuple(float(p) for p in params)
    if len(params) != nparams:
        raise ConfigError(f"model {name!r} takes {nparams} parameters, got {len(params)}")
    parts = factory(*params)
    return FiringModel(sigma=float(sigma), name=name, params=params, **parts)
