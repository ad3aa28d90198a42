"""Piecewise-linear W^{1,1} functions, step functions and their exact algebra.

A :class:`PiecewiseLinearFn` is continuous, compactly supported and given by
its values at finitely many rational breakpoints; both end values are zero.
Derivatives are :class:`StepFn` objects.  All norms are exact rationals.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .exact import Q, Surd, format_rational, mpq

__all__ = [
    "PiecewiseLinearFn",
    "StepFn",
    "Partition",
    "ExclusionRegion",
    "Perturbation",
    "make_piecewise_linear",
    "make_step",
    "tent",
    "zero_function",
    "evaluate",
    "derivative",
    "norm_l1",
    "norm_sobolev",
    "norm_sup",
    "subtract",
    "clamp_nonnegative",
    "simple_approximation",
    "perturbation_sequence",
    "PERTURBATION_KINDS",
    "random_function",
    "corpus",
]


class ValidationError(ValueError):
    """Raised for malformed function data."""


def _strictly_increasing(xs: Sequence[mpq]) -> bool:
    return all(a < b for a, b in zip(xs, xs[1:]))


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    breakpoints: tuple
    values: tuple
    nonnegative: bool = True
    # derived data, filled in __post_init__
    slopes: tuple = field(init=False, repr=False)
    cumulative: tuple = field(init=False, repr=False)

    def __post_init__(self):
        bps = tuple(Q(b) for b in self.breakpoints)
        vals = tuple(Q(v) for v in self.values)
        if len(bps) != len(vals):
            raise ValidationError(
                f"length mismatch: {len(bps)} breakpoints but {len(vals)} values"
            )
        if len(bps) < 2:
            raise ValidationError("need at least two breakpoints")
        if not _strictly_increasing(bps):
            raise ValidationError("breakpoints must be strictly increasing")
        if vals[0] != 0 or vals[-1] != 0:
            raise ValidationError(
                "end values must be zero (compact support); got "
                f"{format_rational(vals[0])} and {format_rational(vals[-1])}"
            )
        if self.nonnegative and any(v < 0 for v in vals):
            raise ValidationError("negative value in a function flagged nonnegative")
        slopes = tuple((vals[k + 1] - vals[k]) / (bps[k + 1] - bps[k]) for k in range(len(bps) - 1))
        cum = [mpq(0)]
        for k in range(len(bps) - 1):
            cum.append(cum[-1] + (vals[k] + vals[k + 1]) * (bps[k + 1] - bps[k]) / 2)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "cumulative", tuple(cum))

    @property
    def left(self) -> mpq:
        return self.breakpoints[0]

    @property
    def right(self) -> mpq:
        return self.breakpoints[-1]

    @property
    def mass(self) -> mpq:
        """Integral of f over the real line."""
        return self.cumulative[-1]

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)

    def piece_index(self, t) -> int:
        """Index k of the piece [b_k, b_{k+1}) holding t; -1 left of support, n-1 right."""
        bps = self.breakpoints
        if t < bps[0]:
            return -1
        lo, hi = 0, len(bps) - 1
        if t >= bps[hi]:
            return hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if t < bps[mid]:
                hi = mid
            else:
                lo = mid
        return lo

    def __call__(self, t):
        return evaluate(self, t)

    def antiderivative(self, t):
        """Integral of f over (-inf, t], exact for rational or surd t."""
        k = self.piece_index(t)
        if k < 0:
            return mpq(0)
        if k >= len(self.slopes):
            return self.mass
        u = t - self.breakpoints[k]
        return self.cumulative[k] + self.values[k] * u + self.slopes[k] * u * u / 2

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearFn):
            return NotImplemented
        return self.breakpoints == other.breakpoints and self.values == other.values

    __hash__ = None

    # JSON ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "breakpoints": [format_rational(b) for b in self.breakpoints],
            "values": [format_rational(v) for v in self.values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, nonnegative: bool = True) -> "PiecewiseLinearFn":
        try:
            bps = data["breakpoints"]
            vals = data["values"]
        except (KeyError, TypeError) as exc:
            raise ValidationError("function JSON needs 'breakpoints' and 'values'") from exc
        try:
            return cls(tuple(Q(str(b)) for b in bps), tuple(Q(str(v)) for v in vals), nonnegative)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str, nonnegative: bool = True) -> "PiecewiseLinearFn":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data, nonnegative)


@dataclass(frozen=True, eq=False)
class StepFn:
    """Piecewise-constant function, zero on the two unbounded intervals.

    ``values[k]`` is the plateau on (breakpoints[k], breakpoints[k+1]).
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bps = tuple(Q(b) for b in self.breakpoints)
        vals = tuple(Q(v) for v in self.values)
        if len(bps) < 1 or len(vals) != max(len(bps) - 1, 0):
            raise ValidationError("a step function needs n breakpoints and n-1 plateau values")
        if not _strictly_increasing(bps):
            raise ValidationError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    def __call__(self, t, side: str = "right"):
        """Value at t; at a breakpoint the right-hand (or left-hand) plateau."""
        bps = self.breakpoints
        for k in range(len(self.values)):
            lo, hi = bps[k], bps[k + 1]
            if side == "right" and lo <= t < hi:
                return self.values[k]
            if side == "left" and lo < t <= hi:
                return self.values[k]
        return mpq(0)

    def norm_l1(self) -> mpq:
        bps = self.breakpoints
        return sum((abs(v) * (bps[k + 1] - bps[k]) for k, v in enumerate(self.values)), mpq(0))

    def integral(self, a, b):
        """Integral over [a, b] (a <= b)."""
        total = mpq(0)
        bps = self.breakpoints
        for k, v in enumerate(self.values):
            lo = max(bps[k], a)
            hi = min(bps[k + 1], b)
            if lo < hi:
                total += v * (hi - lo)
        return total

    def total_jump(self) -> mpq:
        """Sum of the absolute jumps, counting the jumps from and back to zero."""
        padded = (mpq(0),) + self.values + (mpq(0),)
        return sum((abs(b - a) for a, b in zip(padded, padded[1:])), mpq(0))

    def to_dict(self) -> dict:
        return {
            "breakpoints": [format_rational(b) for b in self.breakpoints],
            "values": [format_rational(v) for v in self.values],
        }


@dataclass(frozen=True)
class Partition:
    """The point set P = {a_1 < ... < a_N} and the plateaus of g_eps.

    ``slopes`` has N + 1 entries; slopes[0] lives on (-inf, a_1) and
    slopes[N] on (a_N, inf) and both are zero.
    """

    points: tuple
    slopes: tuple

    def __post_init__(self):
        pts = tuple(Q(p) for p in self.points)
        if not pts:
            raise ValidationError("partition must be nonempty")
        if not _strictly_increasing(pts):
            raise ValidationError("partition points must be strictly increasing")
        slopes = tuple(Q(s) for s in self.slopes) if self.slopes else (mpq(0),) * (len(pts) + 1)
        if len(slopes) != len(pts) + 1:
            raise ValidationError("need one slope per gap (N + 1 including unbounded ends)")
        if slopes[0] != 0 or slopes[-1] != 0:
            raise ValidationError("slopes on the unbounded gaps must be zero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def of_points(cls, points: Iterable) -> "Partition":
        pts = sorted(set(Q(p) for p in points))
        return cls(tuple(pts), ())

    def distance(self, x) -> mpq:
        """d(x, P)."""
        return min(abs(x - p) for p in self.points)

    def gap_index(self, x) -> int:
        """i with a_i < x < a_{i+1}, counting a_0 = -inf; -1 if x is in P."""
        for i, p in enumerate(self.points):
            if x == p:
                return -1
            if x < p:
                return i
        return len(self.points)

    def gap(self, i: int):
        """Endpoints (lo, hi) of gap i; None stands for an infinite end."""
        lo = self.points[i - 1] if i > 0 else None
        hi = self.points[i] if i < len(self.points) else None
        return lo, hi

    def gap_side(self, x) -> str:
        """'right' if x is strictly closer to the right end of its gap, 'left' if
        closer to the left end, 'mid' at the midpoint, 'on' if x is in P."""
        i = self.gap_index(x)
        if i < 0:
            return "on"
        lo, hi = self.gap(i)
        if lo is None:
            return "right"
        if hi is None:
            return "left"
        twice = 2 * x
        if twice > lo + hi:
            return "right"
        if twice < lo + hi:
            return "left"
        return "mid"

    def midpoints(self) -> tuple:
        pts = self.points
        return tuple((a + b) / 2 for a, b in zip(pts, pts[1:]))

    def to_dict(self) -> dict:
        return {
            "points": [format_rational(p) for p in self.points],
            "slopes": [format_rational(s) for s in self.slopes],
        }


@dataclass(frozen=True)
class ExclusionRegion:
    """U_{delta,K} = (-K, K) minus the delta-neighbourhoods of the partition."""

    partition: Partition
    delta: mpq
    cutoff: mpq

    def __post_init__(self):
        delta, cutoff = Q(self.delta), Q(self.cutoff)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "cutoff", cutoff)
        if delta <= 0 or cutoff <= 0:
            raise ValidationError("delta and K must be positive")
        pts = self.partition.points
        if any(b - a <= 2 * delta for a, b in zip(pts, pts[1:])):
            raise ValidationError("the intervals (a_i - delta, a_i + delta) must be pairwise disjoint")
        if cutoff <= max(abs(p) for p in pts) + delta:
            raise ValidationError("K must exceed max |a_i| + delta")

    def contains(self, x) -> bool:
        if not (-self.cutoff < x < self.cutoff):
            return False
        return all(abs(x - p) >= self.delta for p in self.partition.points)

    def component(self, x) -> int:
        """Index of the connected component of U holding x (gap index), -1 outside U."""
        if not self.contains(x):
            return -1
        return self.partition.gap_index(x)

    def to_dict(self) -> dict:
        return {
            "delta": format_rational(self.delta),
            "K": format_rational(self.cutoff),
            "partition": self.partition.to_dict(),
        }


# constructors ----------------------------------------------------------------

def make_piecewise_linear(breakpoints: Sequence, values: Sequence, nonnegative: bool = True) -> PiecewiseLinearFn:
    return PiecewiseLinearFn(tuple(breakpoints), tuple(values), nonnegative)


def make_step(breakpoints: Sequence, values: Sequence) -> StepFn:
    return StepFn(tuple(breakpoints), tuple(values))


def tent(center=0, half_width=1, height=1) -> PiecewiseLinearFn:
    c, w, h = Q(center), Q(half_width), Q(height)
    return make_piecewise_linear((c - w, c, c + w), (0, h, 0))


def zero_function(left=0, right=1) -> PiecewiseLinearFn:
    return make_piecewise_linear((left, right), (0, 0))


def evaluate(f: PiecewiseLinearFn, x):
    """f(x), exact; x may be rational or a Surd."""
    k = f.piece_index(x)
    if k < 0 or k >= len(f.slopes):
        return mpq(0)
    return f.values[k] + f.slopes[k] * (x - f.breakpoints[k])


def derivative(f: PiecewiseLinearFn) -> StepFn:
    return StepFn(f.breakpoints, f.slopes)


def norm_l1(f) -> mpq:
    if isinstance(f, StepFn):
        return f.norm_l1()
    bps, vals = f.breakpoints, f.values
    total = mpq(0)
    for k in range(len(bps) - 1):
        a, b = vals[k], vals[k + 1]
        h = bps[k + 1] - bps[k]
        if a >= 0 and b >= 0 or a <= 0 and b <= 0:
            total += abs(a + b) * h / 2
        else:
            # sign change inside the piece: two triangles
            total += (a * a + b * b) / (abs(a) + abs(b)) * h / 2
    return total


def norm_sobolev(f: PiecewiseLinearFn) -> mpq:
    return norm_l1(f) + derivative(f).norm_l1()


def norm_sup(f) -> mpq:
    return max(abs(v) for v in f.values) if f.values else mpq(0)


def _merged_breakpoints(*fns) -> list:
    return sorted(set().union(*(set(g.breakpoints) for g in fns)))


def _combine(f: PiecewiseLinearFn, g: PiecewiseLinearFn, cf, cg) -> PiecewiseLinearFn:
    bps = _merged_breakpoints(f, g)
    vals = [cf * evaluate(f, t) + cg * evaluate(g, t) for t in bps]
    return PiecewiseLinearFn(tuple(bps), tuple(vals), nonnegative=False)


def subtract(f: PiecewiseLinearFn, g: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """f - g as a (signed) piecewise-linear function."""
    return _combine(f, g, 1, -1)


def add(f: PiecewiseLinearFn, g: PiecewiseLinearFn, scale=1) -> PiecewiseLinearFn:
    """f + scale*g."""
    return _combine(f, g, 1, Q(scale))


def scale(f: PiecewiseLinearFn, c) -> PiecewiseLinearFn:
    c = Q(c)
    return PiecewiseLinearFn(f.breakpoints, tuple(c * v for v in f.values), nonnegative=c >= 0 and f.nonnegative)


def clamp_nonnegative(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """max(f, 0), re-triangulated at the zero crossings, with collinear points removed."""
    bps, vals = f.breakpoints, f.values
    out_b = [bps[0]]
    out_v = [max(vals[0], mpq(0))]
    for k in range(len(bps) - 1):
        a, b = vals[k], vals[k + 1]
        if (a < 0 < b) or (b < 0 < a):
            t = bps[k] + a * (bps[k + 1] - bps[k]) / (a - b)
            out_b.append(t)
            out_v.append(mpq(0))
        out_b.append(bps[k + 1])
        out_v.append(max(b, mpq(0)))
    return _simplify(out_b, out_v)


def _simplify(bps: list, vals: list) -> PiecewiseLinearFn:
    """Drop interior breakpoints where the slope does not change."""
    keep_b, keep_v = [bps[0]], [vals[0]]
    for k in range(1, len(bps) - 1):
        s_in = (vals[k] - keep_v[-1]) / (bps[k] - keep_b[-1])
        s_out = (vals[k + 1] - vals[k]) / (bps[k + 1] - bps[k])
        if s_in != s_out:
            keep_b.append(bps[k])
            keep_v.append(vals[k])
    keep_b.append(bps[-1])
    keep_v.append(vals[-1])
    return PiecewiseLinearFn(tuple(keep_b), tuple(keep_v), nonnegative=all(v >= 0 for v in keep_v))


# simple approximation of the derivative --------------------------------------

def _weighted_median(items):
    """Minimiser of sum w*|v - c| over c for (value, weight) pairs.

    When the minimisers form an interval the midpoint is returned.
    """
    items = sorted(items)
    total = sum(w for _, w in items)
    acc = mpq(0)
    for k, (v, w) in enumerate(items):
        acc += w
        if 2 * acc > total:
            return v
        if 2 * acc == total:
            return (v + items[k + 1][0]) / 2
    return items[-1][0]


def _group_error(pieces, c) -> mpq:
    return sum((w * abs(v - c) for v, w in pieces), mpq(0))


def simple_approximation(f: PiecewiseLinearFn, epsilon, coarsen: bool = False):
    """Step function g with ||f' - g||_1 < epsilon, and its partition.

    Without coarsening g is f' itself (error 0) and P is the breakpoint set
    of f.  With ``coarsen=True`` adjacent bounded pieces are merged greedily,
    cheapest first, while the total error stays below epsilon.  Returns
    ``(g, partition, error)`` with the exact L1 error.
    """
    epsilon = Q(epsilon)
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if f.is_zero():
        raise ValidationError("simple approximation needs a nonzero function")
    fp = derivative(f)
    bps = fp.breakpoints
    # groups of consecutive original pieces: list of [(value, length), ...]
    groups = [[(v, bps[k + 1] - bps[k])] for k, v in enumerate(fp.values)]
    consts = list(fp.values)
    errors = [mpq(0)] * len(groups)
    total = mpq(0)
    if coarsen:
        while len(groups) > 1:
            best = None
            for k in range(len(groups) - 1):
                merged = groups[k] + groups[k + 1]
                c = _weighted_median(merged)
                err = _group_error(merged, c)
                cost = err - errors[k] - errors[k + 1]
                if best is None or cost < best[0]:
                    best = (cost, k, merged, c, err)
            cost, k, merged, c, err = best
            if total + cost >= epsilon:
                break
            total += cost
            groups[k:k + 2] = [merged]
            consts[k:k + 2] = [c]
            errors[k:k + 2] = [err]
    # rebuild breakpoints from group lengths
    new_b = [bps[0]]
    for grp in groups:
        new_b.append(new_b[-1] + sum(w for _, w in grp))
    g = StepFn(tuple(new_b), tuple(consts))
    partition = Partition(tuple(new_b), (mpq(0),) + tuple(consts) + (mpq(0),))
    error = step_distance(fp, g)
    if not error < epsilon:
        raise AssertionError("simple approximation failed its own certificate")
    return g, partition, error


def step_distance(p: StepFn, q: StepFn) -> mpq:
    """||p - q||_1, exact."""
    bps = sorted(set(p.breakpoints) | set(q.breakpoints))
    total = mpq(0)
    for a, b in zip(bps, bps[1:]):
        mid = (a + b) / 2
        total += abs(p(mid) - q(mid)) * (b - a)
    return total


# perturbation sequences -------------------------------------------------------

PERTURBATION_KINDS = ("bump", "dilation", "shift", "noise")


@dataclass(frozen=True)
class Perturbation:
    """f_j together with its exact distance to f and a rate constant.

    ``constant`` satisfies ||f_j - f||_{1,1} <= constant / j.  It is
    independent of j for bump, shift and noise; for dilation it is the exact
    value j * ||f_j - f||_{1,1}.
    """

    fn: PiecewiseLinearFn
    kind: str
    j: int
    gap: mpq
    constant: mpq


def _noise_factors(f: PiecewiseLinearFn, seed: int) -> list:
    rng = random.Random(seed)
    return [mpq(rng.randint(-1000, 1000), 1000) for _ in f.values]


def perturbation_sequence(f: PiecewiseLinearFn, kind: str, j: int, seed: int = 0) -> Perturbation:
    """The j-th member of a sequence f_j -> f in W^{1,1}.

    bump:     f + (1/j) * unit tent of half-width 1/2 at the support midpoint
    dilation: f stretched about the support midpoint by the factor 1 + 1/j
    shift:    f(x - 1/j)
    noise:    interior values multiplied by 1 + u_k/j, u_k uniform in [-1, 1]
    """
    if kind not in PERTURBATION_KINDS:
        raise ValidationError(f"unknown perturbation kind {kind!r}; expected one of {PERTURBATION_KINDS}")
    if int(j) != j or j < 1:
        raise ValidationError("j must be a positive integer")
    j = int(j)
    h = mpq(1, j)
    center = (f.left + f.right) / 2
    if kind == "bump":
        bump = tent(center, mpq(1, 2), 1)
        fj = add(f, bump, h)
        constant = norm_sobolev(bump)
    elif kind == "shift":
        fj = PiecewiseLinearFn(tuple(b + h for b in f.breakpoints), f.values, f.nonnegative)
        constant = derivative(f).norm_l1() + derivative(f).total_jump()
    elif kind == "dilation":
        lam = 1 + h
        fj = PiecewiseLinearFn(tuple(center + (b - center) * lam for b in f.breakpoints), f.values, f.nonnegative)
        constant = None
    else:
        u = _noise_factors(f, seed)
        noise = PiecewiseLinearFn(f.breakpoints, tuple(v * w for v, w in zip(f.values, u)), nonnegative=False)
        fj = add(f, noise, h)
        constant = norm_sobolev(noise)
    if f.nonnegative and any(v < 0 for v in fj.values):
        fj = clamp_nonnegative(fj)
    else:
        fj = PiecewiseLinearFn(fj.breakpoints, fj.values, nonnegative=all(v >= 0 for v in fj.values))
    gap = norm_sobolev(subtract(fj, f))
    if constant is None:
        constant = gap * j
    return Perturbation(fj, kind, j, gap, constant)


# random corpus ----------------------------------------------------------------

def random_function(seed: int, min_points: int = 5, max_points: int = 25, lo: int = -10, hi: int = 10,
                    denominator: int = 4, max_value: int = 16) -> PiecewiseLinearFn:
    """Seeded random nonnegative piecewise-linear function with support in [lo, hi].

    Breakpoints are distinct multiples of 1/denominator and values are
    multiples of 1/denominator in [0, max_value/denominator].
    """
    rng = random.Random(seed)
    n = rng.randint(min_points, max_points)
    grid = range(lo * denominator, hi * denominator + 1)
    ks = sorted(rng.sample(grid, n))
    bps = [mpq(k, denominator) for k in ks]
    vals = [mpq(0)] + [mpq(rng.randint(0, max_value), denominator) for _ in range(n - 2)] + [mpq(0)]
    if all(v == 0 for v in vals):
        vals[n // 2] = mpq(1)
    return make_piecewise_linear(bps, vals)


def corpus(size: int = 50, base_seed: int = 20240101) -> list:
    return [random_function(base_seed + i) for i in range(size)]
