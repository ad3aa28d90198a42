"""Brute-force floating-point references for the exact engine.

Nothing here touches the exact candidate machinery: averages come from a
float antiderivative built with numpy, and suprema from dense radius grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fnspace import PiecewiseLinearFn

__all__ = ["OracleConfig", "OracleResult", "oracle_maximal", "oracle_derivative", "oracle_uncentered"]


@dataclass(frozen=True)
class OracleConfig:
    radius_step: float = 1e-4
    radius_max_factor: float = 2.0
    fd_step: float = 1e-5
    seed: int = 0
    max_uncentered_nodes: int = 1500

    def __post_init__(self):
        if self.radius_step <= 0 or self.fd_step <= 0:
            raise ValueError("oracle steps must be positive")
        if self.radius_max_factor < 2:
            raise ValueError("radius_max_factor must be at least 2")


@dataclass(frozen=True)
class OracleResult:
    value: float
    radius: float
    bound: float  # the exact supremum lies in [value, value + bound]


class _FloatFn:
    """Float view of a piecewise-linear function with a vectorised antiderivative."""

    def __init__(self, f: PiecewiseLinearFn):
        self.b = np.array([float(t) for t in f.breakpoints])
        self.v = np.array([float(t) for t in f.values])
        seg = np.diff(self.b) * (self.v[:-1] + self.v[1:]) / 2
        self.cum = np.concatenate(([0.0], np.cumsum(seg)))
        self.lip = float(np.max(np.abs(np.diff(self.v) / np.diff(self.b)))) if len(self.b) > 1 else 0.0

    def __call__(self, t):
        return np.interp(t, self.b, self.v, left=0.0, right=0.0)

    def F(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.b, t, side="right") - 1, 0, len(self.b) - 2)
        tc = np.clip(t, self.b[0], self.b[-1])
        # trapezoid from b_k to tc
        return self.cum[k] + (tc - self.b[k]) * (self.v[k] + self(tc)) / 2


_cache: dict = {}


def _float_fn(f: PiecewiseLinearFn) -> _FloatFn:
    key = id(f)
    hit = _cache.get(key)
    if hit is None or hit[0] is not f:
        if len(_cache) > 256:
            _cache.clear()
        hit = _cache[key] = (f, _FloatFn(f))
    return hit[1]


def oracle_maximal(f: PiecewiseLinearFn, x, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Max of the centered average over r in {k*step} plus the r -> 0 value.

    The map r -> average has derivative bounded by 2*Lip(f), so the grid
    maximum is within 2*Lip(f)*step of the supremum.
    """
    g = _float_fn(f)
    x = float(x)
    far = max(abs(x - g.b[0]), abs(x - g.b[-1]))
    rmax = cfg.radius_max_factor * far
    n = max(1, int(np.ceil(rmax / cfg.radius_step)))
    r = cfg.radius_step * np.arange(1, n + 1)
    avg = (g.F(x + r) - g.F(x - r)) / (2 * r)
    k = int(np.argmax(avg))
    best, radius = float(avg[k]), float(r[k])
    f0 = float(g(x))
    if f0 >= best:
        best, radius = f0, 0.0
    return OracleResult(best, radius, 2 * g.lip * cfg.radius_step)


def oracle_derivative(compute: Callable[[float], float], x, cfg: OracleConfig = OracleConfig()) -> float:
    """Central difference (compute(x+h) - compute(x-h)) / 2h with h = cfg.fd_step."""
    h = cfg.fd_step
    return (compute(x + h) - compute(x - h)) / (2 * h)


def oracle_uncentered(f: PiecewiseLinearFn, x, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Max of window averages over [x - s, x + t] with s, t on a grid anchored at x.

    The grid step is radius_step unless that would exceed max_uncentered_nodes
    nodes per side, in which case it is coarsened; the reported bound uses the
    step actually taken.
    """
    g = _float_fn(f)
    x = float(x)
    span_l = max(x - g.b[0], 0.0)
    span_r = max(g.b[-1] - x, 0.0)
    span = max(span_l, span_r, cfg.radius_step)
    step = max(cfg.radius_step, span / cfg.max_uncentered_nodes)
    a = x - step * np.arange(0, int(np.ceil(span_l / step)) + 1)
    b = x + step * np.arange(0, int(np.ceil(span_r / step)) + 1)
    Fa, Fb = g.F(a), g.F(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = (Fb[None, :] - Fa[:, None]) / (b[None, :] - a[:, None])
    avg[0, 0] = float(g(x))
    k = np.unravel_index(int(np.nanargmax(avg)), avg.shape)
    return OracleResult(float(avg[k]), float(b[k[1]] - a[k[0]]) / 2, 2 * g.lip * step)
