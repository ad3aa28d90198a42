"""Exact evaluation of centered window averages and of the maximal operators.

For fixed x the window integral I(r) = F(x+r) - F(x-r) is a quadratic
polynomial c0 + c1*r + c2*r^2 between consecutive radii at which an end of
the window crosses a breakpoint of f.  The average I(r)/(2r) is stationary
exactly when c2*r^2 = c0, so every maximiser is a crossing radius, a root
sqrt(c0/c2), a constraint boundary, or the limit r -> 0 (value f(x)).
Enumerating these candidates gives the supremum exactly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .exact import Q, Surd, cmp, mpq
from .fnspace import Partition, PiecewiseLinearFn, evaluate

__all__ = [
    "RadiusConstraint",
    "Unconstrained",
    "Below",
    "AtLeast",
    "WindowInside",
    "DegenerateConstraint",
    "Candidate",
    "TouchSpec",
    "UncenteredTouch",
    "average",
    "window_average",
    "candidate_radii",
    "best_radius",
    "maximal",
    "maximal_uncentered",
    "best_window_uncentered",
    "maximal_local",
    "m1",
    "m2",
    "decompose",
    "Operator",
]


class DegenerateConstraint(ValueError):
    """The feasible set of radii is empty."""


@dataclass(frozen=True)
class RadiusConstraint:
    kind: str  # unconstrained | below | at_least | window_inside
    bound: Optional[mpq] = None
    interval: Optional[tuple] = None

    def resolve(self, x) -> "RadiusConstraint":
        """Rewrite WindowInside(I) at x as Below(distance to the complement of I)."""
        if self.kind != "window_inside":
            return self
        lo, hi = self.interval
        if (lo is not None and x <= lo) or (hi is not None and x >= hi):
            raise ValueError(f"x = {x} is not interior to the interval ({lo}, {hi})")
        dists = [d for d in ((x - lo) if lo is not None else None, (hi - x) if hi is not None else None) if d is not None]
        if not dists:
            return Unconstrained()
        return Below(min(dists))

    def admits(self, r) -> bool:
        if self.kind == "below":
            return 0 < r < self.bound
        if self.kind == "at_least":
            return r >= self.bound
        return r > 0


def Unconstrained() -> RadiusConstraint:
    return RadiusConstraint("unconstrained")


def Below(d) -> RadiusConstraint:
    return RadiusConstraint("below", Q(d))


def AtLeast(d) -> RadiusConstraint:
    d = Q(d)
    if d < 0:
        raise ValueError("AtLeast needs a nonnegative bound")
    return RadiusConstraint("at_least", d)


def WindowInside(lo=None, hi=None) -> RadiusConstraint:
    """Windows [x-r, x+r] inside the interval (lo, hi); None is an infinite end."""
    lo = Q(lo) if lo is not None else None
    hi = Q(hi) if hi is not None else None
    if lo is not None and hi is not None and lo >= hi:
        raise ValueError("empty interval")
    return RadiusConstraint("window_inside", interval=(lo, hi))


class Candidate(NamedTuple):
    radius: object  # mpq or Surd
    value: object  # mpq or Surd
    fvalue: float
    kind: str  # limit_zero | breakpoint_touch | interior | cut
    signature: tuple


@dataclass(frozen=True, eq=False)
class TouchSpec:
    """A maximising radius at x and the attained average.

    ``attained_at_limit`` marks the r -> 0 case (value f(x)).
    ``open_boundary`` marks a supremum approached as r increases to the
    bound of a Below constraint but not attained.
    """

    x: mpq
    radius: object
    value: object
    kind: str  # interior | breakpoint_touch | constraint_boundary | limit_zero
    attained_at_limit: bool = False
    open_boundary: bool = False
    signature: tuple = ()


@dataclass(frozen=True, eq=False)
class UncenteredTouch:
    x: mpq
    left: object
    right: object
    value: object
    kind: str  # fixed | stationary | limit_zero


# ---------------------------------------------------------------------------
# averages

def window_average(f: PiecewiseLinearFn, a, b):
    """Average of f over [a, b], a < b."""
    return (f.antiderivative(b) - f.antiderivative(a)) / (b - a)


def average(f: PiecewiseLinearFn, x, r):
    """(1/2r) * integral of f over [x - r, x + r], exact."""
    if r <= 0:
        raise ValueError("radius must be positive")
    x = Q(x)
    return (f.antiderivative(x + r) - f.antiderivative(x - r)) / (2 * r)


# ---------------------------------------------------------------------------
# candidate enumeration

def _piece_poly(f: PiecewiseLinearFn, k: int, x):
    """(G_k(x), G_k'(x), s_k/2) for the quadratic extension G_k of F on piece k."""
    if k < 0:
        return mpq(0), mpq(0), mpq(0)
    if k >= len(f.slopes):
        return f.mass, mpq(0), mpq(0)
    s = f.slopes[k]
    u = x - f.breakpoints[k]
    v = f.values[k]
    return f.cumulative[k] + v * u + s * u * u / 2, v + s * u, s / 2


def _float(v) -> float:
    return float(v)


def _scan(f: PiecewiseLinearFn, x: mpq, cut=None) -> list:
    """All candidate radii for the unconstrained problem at x, in increasing order.

    ``cut`` adds one extra evaluation radius (a constraint bound); candidates
    at it carry kind 'cut' unless they are crossings or stationary points.
    """
    bps = f.breakpoints
    radii = set()
    for b in bps:
        d = x - b if b < x else b - x
        if d > 0:
            radii.add(d)
    crossings = frozenset(radii)
    if cut is not None and cut > 0:
        radii.add(cut)
    events = sorted(radii)
    polys = {}

    def poly(k):
        p = polys.get(k)
        if p is None:
            p = polys[k] = _piece_poly(f, k, x)
        return p

    fx = evaluate(f, x)
    out = [Candidate(mpq(0), fx, float(fx), "limit_zero", ("limit",))]
    lo = mpq(0)
    for idx in range(len(events) + 1):
        hi = events[idx] if idx < len(events) else None
        rmid = (lo + hi) / 2 if hi is not None else lo + 1
        pl = f.piece_index(x - rmid)
        pr = f.piece_index(x + rmid)
        al, bl, gl = poly(pl)
        ar, br, gr = poly(pr)
        c0 = ar - al
        c1 = br + bl
        c2 = gr - gl
        if c2 != 0:
            q = c0 / c2
            if q > lo * lo and (hi is None or q < hi * hi):
                r = Surd.sqrt(q)
                val = c1 / 2 + c2 * r
                out.append(Candidate(r, val, _float(val), "interior", ("interior", pl, pr)))
        if hi is None:
            break
        val = (c0 + c1 * hi + c2 * hi * hi) / (2 * hi)
        if hi in crossings:
            kind = "breakpoint_touch"
            sig = ("touch", pl, pr)
        elif c2 != 0 and c2 * hi * hi == c0:
            kind = "interior"
            sig = ("interior", pl, pr)
        else:
            kind = "cut"
            sig = ("cut",)
        out.append(Candidate(hi, val, float(val), kind, sig))
        lo = hi
    return out


_REL_MARGIN = 1e-9


def _argmax(cands) -> Candidate:
    """Largest value, smallest radius among exact ties.

    Float values prune clear losers; anything within a conservative margin
    of the running best is compared exactly.
    """
    best = None
    for c in cands:
        if best is None:
            best = c
            continue
        margin = _REL_MARGIN * (1.0 + abs(best.fvalue))
        if c.fvalue < best.fvalue - margin:
            continue
        if c.fvalue > best.fvalue + margin:
            best = c
            continue
        order = cmp(c.value, best.value)
        if order > 0 or (order == 0 and cmp(c.radius, best.radius) < 0):
            best = c
    return best


def _touch(x, c: Candidate, constraint: RadiusConstraint) -> TouchSpec:
    kind = c.kind
    open_boundary = False
    if constraint.kind in ("below", "at_least") and c.kind != "limit_zero" and cmp(c.radius, constraint.bound) == 0:
        kind = "constraint_boundary"
        open_boundary = constraint.kind == "below"
    elif kind == "cut":
        kind = "constraint_boundary"
    return TouchSpec(
        x=x,
        radius=c.radius,
        value=c.value,
        kind=kind,
        attained_at_limit=c.kind == "limit_zero",
        open_boundary=open_boundary,
        signature=c.signature,
    )


def _filter(cands, constraint: RadiusConstraint) -> list:
    if constraint.kind == "unconstrained":
        return [c for c in cands if c.kind != "cut"]
    d = constraint.bound
    if constraint.kind == "below":
        if d <= 0:
            raise DegenerateConstraint("Below(0) admits no radius")
        # sup over (0, d) equals the max over [0, d] by continuity in r
        return [c for c in cands if c.kind == "limit_zero" or cmp(c.radius, d) <= 0]
    if constraint.kind == "at_least":
        if d == 0:
            return [c for c in cands if c.kind != "cut"]
        return [c for c in cands if c.kind != "limit_zero" and cmp(c.radius, d) >= 0]
    raise ValueError(f"unresolved constraint {constraint.kind}")


def candidate_radii(f: PiecewiseLinearFn, x, constraint: Optional[RadiusConstraint] = None) -> list:
    """Candidates (radius, value, kind) that can attain the constrained supremum."""
    x = Q(x)
    constraint = (constraint or Unconstrained()).resolve(x)
    cands = _scan(f, x, constraint.bound if constraint.kind != "unconstrained" else None)
    return _filter(cands, constraint)


def best_radius(f: PiecewiseLinearFn, x, constraint: Optional[RadiusConstraint] = None) -> TouchSpec:
    x = Q(x)
    constraint = (constraint or Unconstrained()).resolve(x)
    return _touch(x, _argmax(candidate_radii(f, x, constraint)), constraint)


def maximal(f: PiecewiseLinearFn, x):
    """Mf(x)."""
    return best_radius(f, x).value


def maximal_local(f: PiecewiseLinearFn, interval: tuple, x):
    """M_I f(x) for I = (lo, hi); None marks an infinite end."""
    lo, hi = interval
    return best_radius(f, x, WindowInside(lo, hi)).value


def _partition_distance(partition: Partition, x) -> mpq:
    return partition.distance(x)


def m1(f: PiecewiseLinearFn, partition: Partition, x):
    """Supremum over radii r < d(x, P)."""
    return m1_touch(f, partition, x).value


def m1_touch(f, partition: Partition, x) -> TouchSpec:
    x = Q(x)
    d = _partition_distance(partition, x)
    if d == 0:
        raise DegenerateConstraint(f"x = {x} lies in P, so no radius r < d(x, P) exists")
    return best_radius(f, x, Below(d))


def m2(f: PiecewiseLinearFn, partition: Partition, x):
    """Supremum over radii r >= d(x, P)."""
    return m2_touch(f, partition, x).value


def m2_touch(f, partition: Partition, x) -> TouchSpec:
    x = Q(x)
    return best_radius(f, x, AtLeast(_partition_distance(partition, x)))


class Decomposition(NamedTuple):
    m: TouchSpec
    m1: Optional[TouchSpec]
    m2: TouchSpec
    distance: mpq


def decompose(f: PiecewiseLinearFn, partition: Partition, x) -> Decomposition:
    """M, M1 and M2 at x from a single candidate scan.

    ``m1`` is None when x lies in P.
    """
    x = Q(x)
    d = _partition_distance(partition, x)
    cands = _scan(f, x, d if d > 0 else None)
    full = Unconstrained()
    touch_m = _touch(x, _argmax(_filter(cands, full)), full)
    c2 = AtLeast(d)
    touch_2 = _touch(x, _argmax(_filter(cands, c2)), c2)
    touch_1 = None
    if d > 0:
        c1 = Below(d)
        touch_1 = _touch(x, _argmax(_filter(cands, c1)), c1)
    return Decomposition(touch_m, touch_1, touch_2, d)


# ---------------------------------------------------------------------------
# uncentered operator

def _uncentered_candidates(f: PiecewiseLinearFn, x: mpq):
    """(value, left, right, kind) for every window [a, b] containing x that
    can maximise the average: both ends fixed (breakpoints or x), one end
    stationary (f(end) = average), or both ends stationary."""
    bps, vals, slopes, cum = f.breakpoints, f.values, f.slopes, f.cumulative
    m = len(slopes)
    lefts = [b for b in bps if b < x] + [x]
    rights = [x] + [b for b in bps if b > x]
    F = f.antiderivative
    fx = evaluate(f, x)
    yield fx, x, x, "limit_zero"
    Fl = {a: F(a) for a in lefts}
    Fr = {b: F(b) for b in rights}
    for a in lefts:
        for b in rights:
            if a < b:
                yield (Fr[b] - Fl[a]) / (b - a), a, b, "fixed"
    # left end fixed, right end stationary in piece j
    for a in lefts:
        Fa = Fl[a]
        for j in range(m):
            s = slopes[j]
            if s == 0 or bps[j + 1] <= x:
                continue
            alpha = a - bps[j]
            disc = alpha * alpha + 2 * (vals[j] * alpha + cum[j] - Fa) / s
            if disc <= 0:
                continue
            b = a + Surd.sqrt(disc)
            if not (bps[j] < b < bps[j + 1]) or not (b > x):
                continue
            yield vals[j] + s * (b - bps[j]), a, b, "stationary"
    # right end fixed, left end stationary in piece i
    for b in rights:
        Fb = Fr[b]
        for i in range(m):
            s = slopes[i]
            if s == 0 or bps[i] >= x:
                continue
            beta = b - bps[i]
            disc = beta * beta + 2 * (vals[i] * beta + cum[i] - Fb) / s
            if disc <= 0:
                continue
            a = b - Surd.sqrt(disc)
            if not (bps[i] < a < bps[i + 1]) or not (a < x):
                continue
            yield vals[i] + s * (a - bps[i]), a, b, "stationary"
    # both ends stationary: f(a) = f(b) = c = average
    for i in range(m):
        si = slopes[i]
        if si == 0 or bps[i] >= x:
            continue
        for j in range(i + 1, m):
            sj = slopes[j]
            if sj == 0 or bps[j + 1] <= x:
                continue
            vi, vj = vals[i], vals[j]
            a2 = 1 / (2 * si) - 1 / (2 * sj)
            a1 = vj / sj - vi / si - (bps[j] - bps[i])
            a0 = cum[j] - cum[i] - vj * vj / (2 * sj) + vi * vi / (2 * si)
            roots = []
            if a2 == 0:
                if a1 != 0:
                    roots.append(-a0 / a1)
            else:
                disc = a1 * a1 - 4 * a2 * a0
                if disc >= 0:
                    sq = Surd.sqrt(disc)
                    roots.append((-a1 + sq) / (2 * a2))
                    roots.append((-a1 - sq) / (2 * a2))
            for c in roots:
                a = bps[i] + (c - vi) / si
                b = bps[j] + (c - vj) / sj
                if bps[i] < a < bps[i + 1] and bps[j] < b < bps[j + 1] and a < x < b:
                    yield c, a, b, "stationary"


def best_window_uncentered(f: PiecewiseLinearFn, x) -> UncenteredTouch:
    x = Q(x)
    best = None
    bestf = 0.0
    for val, a, b, kind in _uncentered_candidates(f, x):
        fv = float(val)
        if best is not None:
            margin = _REL_MARGIN * (1.0 + abs(bestf))
            if fv < bestf - margin:
                continue
            if fv <= bestf + margin and cmp(val, best[0]) <= 0:
                continue
        best = (val, a, b, kind)
        bestf = fv
    val, a, b, kind = best
    return UncenteredTouch(x, a, b, val, kind)


def maximal_uncentered(f: PiecewiseLinearFn, x):
    """Supremum of averages over all windows [a, b] with a <= x <= b, a < b."""
    return best_window_uncentered(f, x).value


# ---------------------------------------------------------------------------
# operator descriptor used by profiles and the CLI

@dataclass(frozen=True)
class Operator:
    """Which maximal operator a profile samples.

    name is one of M, Mu (uncentered), MI (with ``interval``), M1, M2 (with
    ``partition``).
    """

    name: str
    interval: Optional[tuple] = None
    partition: Optional[Partition] = None

    def __post_init__(self):
        if self.name not in ("M", "Mu", "MI", "M1", "M2"):
            raise ValueError(f"unknown operator {self.name!r}")
        if self.name == "MI" and self.interval is None:
            raise ValueError("operator MI needs an interval")
        if self.name in ("M1", "M2") and self.partition is None:
            raise ValueError(f"operator {self.name} needs a partition")

    def touch(self, f: PiecewiseLinearFn, x):
        if self.name == "M":
            return best_radius(f, x)
        if self.name == "Mu":
            return best_window_uncentered(f, x)
        if self.name == "MI":
            return best_radius(f, x, WindowInside(*self.interval))
        if self.name == "M1":
            return m1_touch(f, self.partition, x)
        return m2_touch(f, self.partition, x)

    def label(self) -> str:
        if self.name == "MI":
            lo, hi = self.interval
            return f"MI({lo},{hi})"
        return self.name


def worker_count() -> int:
    """Parallelism cap from MAXLAB_THREADS (default 1: serial)."""
    try:
        n = int(os.environ.get("MAXLAB_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def map_points(func, items: Sequence, workers: Optional[int] = None) -> list:
    """Apply ``func`` to every item, optionally across processes; order preserved."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) < 64:
        return [func(it) for it in items]
    chunk = max(1, math.ceil(len(items) / (workers * 4)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunk))
