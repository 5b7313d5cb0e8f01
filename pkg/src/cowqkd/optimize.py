"""One-dimensional maximisation and root bracketing shared by all rate curves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

INV_PHI = (math.sqrt(5) - 1) / 2
MU_BRACKET = (1e-4, 3.0)
REL_TOL = 1e-6
GRID_POINTS = 96


class OptimizationError(RuntimeError):
    pass


def golden_max(fn, a: float, b: float, xtol: float = 1e-9, max_iter: int = 500):
    """Golden-section search for the maximum of a unimodal ``fn`` on ``[a, b]``.

    Returns ``(x, fn(x))`` once the bracket is narrower than ``xtol``.
    """
    if not a < b:
        raise OptimizationError(f"invalid bracket [{a}, {b}]")
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if (b - a) <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass(frozen=True)
class MaxResult:
    x: float
    value: float
    at_lower_edge: bool
    at_upper_edge: bool


def maximize_log(fn, bracket=MU_BRACKET, tol: float = REL_TOL, grid: int = GRID_POINTS) -> MaxResult:
    """Maximise ``fn(x)`` over ``x`` in ``bracket`` by golden section on ``log x``.

    A coarse log grid first isolates the best cell, so a curve with a local
    hump followed by a rise to the upper edge is still handled.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise OptimizationError(f"invalid bracket {bracket}")
    us = np.linspace(math.log(lo), math.log(hi), grid)
    vals = np.array([fn(math.exp(u)) for u in us])
    if not np.isfinite(vals).any():
        raise OptimizationError("objective is not finite anywhere in the bracket")
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    k = int(np.argmax(vals))
    if k == grid - 1:
        return MaxResult(hi, float(vals[k]), False, True)
    if k == 0 and vals[0] >= vals[1]:
        return MaxResult(lo, float(vals[0]), True, False)
    a, b = us[max(k - 1, 0)], us[min(k + 1, grid - 1)]
    # An absolute width on log x is a relative width on x.
    u, v = golden_max(lambda u: fn(math.exp(u)), a, b, xtol=tol)
    return MaxResult(math.exp(u), v, False, False)


def first_root_above(fn, start: float, stop: float, grid: int = GRID_POINTS, xtol: float = 1e-12):
    """Smallest root of ``fn`` in ``(start, stop]`` found by a log-grid scan and Brent.

    ``fn(start)`` is expected to be positive. Returns ``None`` when no sign
    change occurs.
    """
    xs = np.geomspace(start, stop, grid)
    prev_x, prev_v = xs[0], fn(xs[0])
    for x in xs[1:]:
        v = fn(x)
        if prev_v > 0 >= v:
            if v == 0:
                return float(x)
            return float(brentq(fn, prev_x, x, xtol=xtol, rtol=4 * np.finfo(float).eps))
        prev_x, prev_v = x, v
    return None
