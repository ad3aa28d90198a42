"""Derivatives of maximal functions and variation functionals over grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

from .exact import Q, cmp, format_exact, mpq
from .fnspace import ExclusionRegion, Partition, PiecewiseLinearFn, derivative, evaluate
from .maxops import (
    Operator,
    TouchSpec,
    UncenteredTouch,
    best_radius,
    best_window_uncentered,
    map_points,
    maximal,
)

__all__ = [
    "GridProfile",
    "DistanceReport",
    "luiro_derivative",
    "pinned_derivative",
    "m2_derivative_formula",
    "profile",
    "l1_derivative_distance",
    "total_variation",
    "total_variation_exact_uncentered",
    "total_variation_centered",
    "tail_variation",
    "near_point_variation",
    "slope_at",
]

SOURCES = ("luiro", "m2_formula", "f_prime", "gap")


def slope_at(f: PiecewiseLinearFn, x, side: str = "right") -> mpq:
    """One-sided derivative of f at x (right-hand by default)."""
    return derivative(f)(x, side=side)


def luiro_derivative(f: PiecewiseLinearFn, touch: TouchSpec):
    """Average of f' over the optimal window, or f'(x) when the sup is the r -> 0 limit."""
    if touch.attained_at_limit:
        return slope_at(f, touch.x)
    r = touch.radius
    if r <= 0:
        raise ValueError("Luiro's formula needs a positive radius")
    x = touch.x
    return (evaluate(f, x + r) - evaluate(f, x - r)) / (2 * r)


def pinned_derivative(f: PiecewiseLinearFn, x, r, side: str, avg=None):
    """Derivative of x -> average over a window with one end held fixed.

    side='right': the right end x + r stays put and the left end moves at
    twice the speed of the centre, giving I/(2r^2) - f(x - r)/r.
    side='left' is the mirror image, -I/(2r^2) + f(x + r)/r.
    """
    if avg is None:
        avg = (f.antiderivative(x + r) - f.antiderivative(x - r)) / (2 * r)
    if side == "right":
        return (avg - evaluate(f, x - r)) / r
    if side == "left":
        return (evaluate(f, x + r) - avg) / r
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def m2_derivative_formula(f: PiecewiseLinearFn, partition: Partition, touch: TouchSpec):
    """(M2 f)'(x) from a touch with radius r >= d(x, P) > 0.

    For x in the half of its gap nearer the right end the formula is
    integral/(2r^2) - f(x-r)/r; nearer the left end the mirrored one.
    """
    x = touch.x
    d = partition.distance(x)
    if d == 0:
        raise ValueError("the formula needs d(x, P) > 0")
    if touch.attained_at_limit or cmp(touch.radius, d) < 0:
        raise ValueError("touch radius must satisfy r >= d(x, P)")
    side = partition.gap_side(x)
    if side == "mid":
        raise ValueError(f"x = {x} is a gap midpoint; the one-sided formula is undefined there")
    return pinned_derivative(f, x, touch.radius, side, avg=touch.value)


# ---------------------------------------------------------------------------
# profiles

@dataclass
class GridProfile:
    operator: str
    grid: tuple
    values: tuple
    radii: tuple
    radius_kinds: tuple
    derivatives: tuple
    sources: tuple
    signatures: tuple = ()
    jumps: tuple = ()
    step: Optional[float] = None
    fvalues: list = field(default_factory=list, repr=False)
    fderivs: list = field(default_factory=list, repr=False)
    fradii: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        n = len(self.grid)
        for name in ("values", "radii", "radius_kinds", "derivatives", "sources"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"profile field {name} has the wrong length")
        self.fvalues = [float(v) if v is not None else math.nan for v in self.values]
        self.fderivs = [float(d) if d is not None else math.nan for d in self.derivatives]
        self.fradii = [float(r) if r is not None else math.nan for r in self.radii]
        if not self.jumps:
            self.jumps = tuple(_radius_jumps(self.grid, self.fradii))

    def __len__(self):
        return len(self.grid)

    def usable(self, k: int) -> bool:
        return self.sources[k] != "gap" and not math.isnan(self.fderivs[k])

    def csv_rows(self) -> list:
        header = [
            "x", "value", "radius", "radius_kind", "derivative", "derivative_source",
            "x_exact", "value_exact", "radius_exact", "derivative_exact",
        ]
        rows = [header]
        for k, x in enumerate(self.grid):
            d = self.derivatives[k]
            rows.append([
                _dec(x), _dec(self.values[k]), _dec(self.radii[k]), self.radius_kinds[k],
                _dec(d) if d is not None else "", self.sources[k],
                format_exact(x), format_exact(self.values[k]), format_exact(self.radii[k]),
                format_exact(d) if d is not None else "",
            ])
        return rows


def _dec(v) -> str:
    return format(float(v), ".17g")


def _radius_jumps(grid, fradii) -> list:
    n = len(grid)
    flags = [False] * n
    for k in range(n - 1):
        h = float(grid[k + 1] - grid[k])
        if abs(fradii[k + 1] - fradii[k]) > 10 * h:
            flags[k] = flags[k + 1] = True
    return flags


def _point_record(f: PiecewiseLinearFn, op: Operator, x):
    touch = op.touch(f, x)
    if isinstance(touch, UncenteredTouch):
        kind = {"fixed": "breakpoint_touch", "stationary": "interior", "limit_zero": "limit_zero"}[touch.kind]
        return touch.value, (touch.right - touch.left) / 2, kind, None, "gap", ("uncentered",)
    deriv, source = _derivative_for(f, op, touch)
    return touch.value, touch.radius, touch.kind, deriv, source, touch.signature


def _derivative_for(f: PiecewiseLinearFn, op: Operator, touch: TouchSpec):
    x = touch.x
    if touch.attained_at_limit:
        return slope_at(f, x), "f_prime"
    if touch.kind == "constraint_boundary":
        side = _constraint_side(op, x)
        if side is None:
            return None, "gap"
        return pinned_derivative(f, x, touch.radius, side, avg=touch.value), "m2_formula"
    if op.name == "M2":
        side = op.partition.gap_side(x)
        if side == "mid":
            return None, "gap"
        if side != "on":
            return pinned_derivative(f, x, touch.radius, side, avg=touch.value), "m2_formula"
    return luiro_derivative(f, touch), "luiro"


def _constraint_side(op: Operator, x) -> Optional[str]:
    if op.name in ("M1", "M2"):
        side = op.partition.gap_side(x)
        return side if side in ("left", "right") else None
    if op.name == "MI":
        lo, hi = op.interval
        if lo is None:
            return "right"
        if hi is None:
            return "left"
        if 2 * x > lo + hi:
            return "right"
        if 2 * x < lo + hi:
            return "left"
    return None


def profile(f: PiecewiseLinearFn, grid: Sequence, operator: Operator, workers: Optional[int] = None) -> GridProfile:
    """Sample an operator on a grid: values, optimal radii and derivatives.

    Per-point failures are recorded as gaps rather than raised.
    """
    grid = tuple(Q(x) for x in grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if any(a >= b for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    records = map_points(partial(_safe_record, f, operator), grid, workers)
    values, radii, kinds, derivs, sources, sigs = zip(*records)
    step = float(grid[1] - grid[0]) if len(grid) > 1 else None
    return GridProfile(operator.label(), grid, values, radii, kinds, derivs, sources, sigs, step=step)


def _safe_record(f, op, x):
    try:
        return _point_record(f, op, x)
    except ValueError:
        return mpq(0), mpq(0), "gap", None, "gap", ("gap",)


# ---------------------------------------------------------------------------
# distances and variations

@dataclass(frozen=True)
class DistanceReport:
    distance: float
    skipped_measure: float
    grid_step: Optional[float]
    region: Optional[dict]

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "skipped_measure": self.skipped_measure,
            "grid_step": self.grid_step,
            "region": self.region,
        }


def l1_derivative_distance(p: GridProfile, q: GridProfile, region: Optional[ExclusionRegion] = None) -> DistanceReport:
    """Trapezoid estimate of the L1 distance between two derivative profiles.

    Intervals whose ends are gaps or fall outside ``region`` are skipped and
    their length is reported.
    """
    if p.grid != q.grid:
        raise ValueError("profiles are sampled on different grids")
    grid = p.grid
    ok = [p.usable(k) and q.usable(k) and (region is None or region.contains(x)) for k, x in enumerate(grid)]
    diff = [abs(a - b) for a, b in zip(p.fderivs, q.fderivs)]
    terms, skipped = [], []
    for k in range(len(grid) - 1):
        h = float(grid[k + 1] - grid[k])
        if ok[k] and ok[k + 1]:
            terms.append(0.5 * (diff[k] + diff[k + 1]) * h)
        else:
            skipped.append(h)
    return DistanceReport(
        math.fsum(terms),
        math.fsum(skipped),
        p.step,
        region.to_dict() if region is not None else None,
    )


def total_variation(p) -> float:
    """Sum of |value_{k+1} - value_k| over the grid (GridProfile or value sequence)."""
    vals = p.fvalues if isinstance(p, GridProfile) else [float(v) for v in p]
    return math.fsum(abs(b - a) for a, b in zip(vals, vals[1:]))


def _grid(lo, hi, step) -> list:
    """lo, lo + step, ..., up to and including hi."""
    lo, hi, step = Q(lo), Q(hi), Q(step)
    pts = []
    k = 0
    while True:
        x = lo + k * step
        if x >= hi:
            break
        pts.append(x)
        k += 1
    pts.append(hi)
    return pts


def _variation_with_tails(f: PiecewiseLinearFn, op_value, step) -> float:
    pts = sorted(set(_grid(f.left, f.right, step)) | set(f.breakpoints))
    vals = [op_value(f, x) for x in pts]
    # beyond the support both operators decrease monotonically to zero
    return total_variation(vals) + float(vals[0]) + float(vals[-1])


def total_variation_exact_uncentered(f: PiecewiseLinearFn, step="1/8") -> float:
    """Variation of the uncentered maximal function.

    Values are exact at every sample (breakpoints plus a uniform grid over
    the support); outside the support the function is monotone, so the two
    tails contribute exactly their boundary values.
    """
    from .maxops import maximal_uncentered

    return _variation_with_tails(f, maximal_uncentered, step)


def total_variation_centered(f: PiecewiseLinearFn, step="1/8") -> float:
    """Same construction for the centered operator."""
    return _variation_with_tails(f, maximal, step)


def tail_variation(f: PiecewiseLinearFn, K, step="1/16") -> float:
    """Variation of Mf over (-inf, -K] and [K, inf).

    Inside the support the variation is sampled on a grid; beyond the
    support Mf decreases monotonically to 0, which contributes its boundary
    value exactly.
    """
    K = Q(K)
    if K <= 0:
        raise ValueError("K must be positive")
    if f.is_zero():
        return 0.0
    total = []
    # right tail
    if K >= f.right:
        total.append(float(maximal(f, K)))
    else:
        vals = [maximal(f, x) for x in _grid(K, f.right, step)]
        total.append(total_variation(vals) + float(vals[-1]))
    # left tail
    if -K <= f.left:
        total.append(float(maximal(f, -K)))
    else:
        vals = [maximal(f, x) for x in _grid(f.left, -K, step)]
        total.append(total_variation(vals) + float(vals[0]))
    return math.fsum(total)


def near_point_grid(p, delta, step) -> list:
    p, delta, step = Q(p), Q(delta), Q(step)
    pts = {p - delta, p + delta}
    k = 0
    while k * step < delta:
        pts.add(p + k * step)
        pts.add(p - k * step)
        k += 1
    return sorted(pts)


def near_point_variation(f: PiecewiseLinearFn, p, delta, step) -> float:
    """Grid variation of Mf over [p - delta, p + delta]."""
    if Q(delta) <= 0:
        raise ValueError("delta must be positive")
    vals = [maximal(f, x) for x in near_point_grid(p, delta, step)]
    return total_variation(vals)
