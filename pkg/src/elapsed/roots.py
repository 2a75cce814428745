"""Bracketing root search for scalar maps with several roots."""
from __future__ import annotations

from typing import Callable, List

import numpy as np
from scipy.optimize import brentq, minimize_scalar


def scan_roots(f: Callable, a: float, b: float, n: int = 4096,
               xtol: float = 1e-13, tangency_tol: float = 1e-10) -> List[float]:
    """All roots of f on [a, b].

    Sign changes on an n-interval grid are refined with Brent's method.
    Grid-local minima of |f| without a sign change are refined by a bounded
    minimisation and reported when |f| drops below ``tangency_tol`` (double
    roots, which a sign scan cannot see).
    """
    x = np.linspace(a, b, n + 1)
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            raise ValueError
    except (ValueError, TypeError):
        y = np.array([f(t) for t in x], dtype=float)
    roots = []
    for i in range(n + 1):
        if y[i] == 0.0:
            roots.append(float(x[i]))
        elif i < n and y[i] * y[i + 1] < 0:
            g = lambda t: float(f(t))
            roots.append(float(brentq(g, x[i], x[i + 1], xtol=xtol, rtol=1e-15, maxiter=200)))
    ay = np.abs(y)
    for i in range(1, n):
        if y[i] == 0.0 or y[i - 1] * y[i] <= 0 or y[i] * y[i + 1] <= 0:
            continue
        if ay[i] <= ay[i - 1] and ay[i] <= ay[i + 1]:
            res = minimize_scalar(lambda t: abs(float(f(t))), bounds=(x[i - 1], x[i + 1]),
                                  method="bounded", options={"xatol": 1e-14})
            if res.fun < tangency_tol:
                roots.append(float(res.x))
    return sorted(roots)


def bisect_sign(f: Callable, a: float, b: float, width: float = 1e-12) -> float:
    """Plain bisection on a bracket with f(a) * f(b) <= 0."""
    fa = f(a)
    if fa == 0:
        return a
    while b - a > width:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)
