"""Executable versions of the continuity argument and its supporting lemmas.

Each verifier returns a plain report object with a ``passed`` flag and a
``to_dict`` for JSON output; nothing here raises on a failed check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .deriv import (
    GridProfile,
    _derivative_for,
    l1_derivative_distance,
    luiro_derivative,
    m2_derivative_formula,
    near_point_grid,
    near_point_variation,
    slope_at,
    tail_variation,
)
from .exact import Q, Surd, cmp, format_rational, mpq, sign
from .fnspace import (
    ExclusionRegion,
    Partition,
    PiecewiseLinearFn,
    derivative,
    evaluate,
    make_piecewise_linear,
    norm_l1,
    norm_sobolev,
    norm_sup,
    perturbation_sequence,
    simple_approximation,
    step_distance,
    subtract,
)
from .maxops import (
    Operator,
    _argmax,
    _scan,
    best_radius,
    decompose,
    map_points,
    maximal,
    maximal_local,
    m1_touch,
    m2_touch,
)

__all__ = [
    "GridSpec",
    "build_grid",
    "ContinuityReport",
    "DecompositionReport",
    "run_continuity",
    "verify_decomposition",
    "verify_line_subtraction",
    "verify_m1_bound",
    "verify_m2_regularity",
    "find_tail_bound",
    "find_near_point_delta",
    "canonical_line",
    "default_region",
    "verify_luiro",
    "verify_oracle",
    "sample_points",
]


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class GridSpec:
    start: mpq
    end: mpq
    step: mpq

    def __post_init__(self):
        object.__setattr__(self, "start", Q(self.start))
        object.__setattr__(self, "end", Q(self.end))
        object.__setattr__(self, "step", Q(self.step))
        if self.step <= 0:
            raise ValueError("grid step must be positive")
        if self.end < self.start:
            raise ValueError("grid end precedes its start")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec must look like start:end:step, got {text!r}")
        return cls(*(Q(p) for p in parts))

    def __str__(self):
        return f"{format_rational(self.start)}:{format_rational(self.end)}:{format_rational(self.step)}"


_OFFSET_DIVISORS = (2, 3, 5, 7, 11, 13, 17, 19, 23)


def build_grid(spec: GridSpec, avoid: Sequence = ()) -> list:
    """Points start + offset + k*step up to end inclusive.

    The offset is 0 unless some point would land on a member of ``avoid``;
    then step/2, step/3, step/5, ... is tried until no point does.
    """
    avoid = set(Q(a) for a in avoid)
    for offset in (mpq(0),) + tuple(spec.step / d for d in _OFFSET_DIVISORS):
        n = int((spec.end - spec.start - offset) // spec.step)
        pts = [spec.start + offset + k * spec.step for k in range(n + 1)]
        if not avoid.intersection(pts):
            return pts
    raise ValueError("could not find a grid offset avoiding the given points")


def default_grid_spec(f: PiecewiseLinearFn, step="1/100", margin=2) -> GridSpec:
    margin = Q(margin)
    return GridSpec(f.left - margin, f.right + margin, Q(step))


# ---------------------------------------------------------------------------
# selection procedures

@dataclass
class TailSelection:
    K: mpq
    variation: float
    epsilon: float

    def to_dict(self):
        return {"K": format_rational(self.K), "variation": self.variation, "epsilon": self.epsilon}


def find_tail_bound(f: PiecewiseLinearFn, epsilon, step="1/16", max_doublings: int = 64) -> TailSelection:
    """Smallest K in a doubling search, starting at the support radius, with
    tail_variation(f, K) < epsilon/2."""
    epsilon = Q(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    K = max(abs(f.left), abs(f.right))
    for _ in range(max_doublings):
        tv = tail_variation(f, K, step)
        if tv < float(epsilon) / 2:
            return TailSelection(K, tv, float(epsilon))
        K *= 2
    raise RuntimeError("tail search did not terminate")


@dataclass
class NearPointSelection:
    delta: mpq
    variation: float
    epsilon: float
    per_point: list
    # Lemma-style split of [p - delta, p + delta] with delta_i = 2*delta:
    # samples where the optimal window stays inside (p - 2delta, p + 2delta)
    # versus those where it leaves, with the derivative bound at the latter
    local_samples: int = 0
    escaping_samples: int = 0
    escaping_violations: int = 0
    escaping_bound: float = 0.0

    def to_dict(self):
        d = asdict(self)
        d["delta"] = format_rational(self.delta)
        return d


def _min_gap(points) -> Optional[mpq]:
    pts = sorted(points)
    if len(pts) < 2:
        return None
    return min(b - a for a, b in zip(pts, pts[1:]))


def find_near_point_delta(f: PiecewiseLinearFn, points: Sequence, epsilon, points_per_half: int = 8,
                          max_halvings: int = 60) -> NearPointSelection:
    """Halve delta until the summed variation of Mf over [p - delta, p + delta] is below epsilon/2.

    The start value is a quarter of the minimal gap between the points (so the
    neighbourhoods are disjoint), capped at 1.  Each window is sampled with
    ``points_per_half`` steps on either side of p.
    """
    epsilon = Q(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    points = sorted(set(Q(p) for p in points))
    gap = _min_gap(points)
    delta = min(mpq(1), gap / 4) if gap is not None else mpq(1)
    for _ in range(max_halvings):
        step = delta / points_per_half
        per = [near_point_variation(f, p, delta, step) for p in points]
        total = math.fsum(per)
        if total < float(epsilon) / 2:
            sel = NearPointSelection(delta, total, float(epsilon), per)
            _escape_diagnostic(f, points, sel, step)
            return sel
        delta /= 2
    raise RuntimeError("near-point search did not terminate")


def _escape_diagnostic(f, points, sel: NearPointSelection, step):
    delta = sel.delta
    outer = 2 * delta
    bound = derivative(f).norm_l1() / (2 * delta)  # ||f'||_1 * l / (2 delta_i (l - 1)) with l = 2
    sel.escaping_bound = float(bound)
    for p in points:
        for x in near_point_grid(p, delta, step):
            touch = best_radius(f, x)
            local = maximal_local(f, (p - outer, p + outer), x)
            if cmp(touch.value, local) > 0:
                sel.escaping_samples += 1
                ok = not touch.attained_at_limit and cmp(touch.radius, delta) >= 0
                ok = ok and cmp(abs(luiro_derivative(f, touch)), bound) <= 0
                if not ok:
                    sel.escaping_violations += 1
            else:
                sel.local_samples += 1


def default_region(f: PiecewiseLinearFn, partition: Partition, delta=None, K=None) -> ExclusionRegion:
    pts = partition.points
    gap = _min_gap(pts)
    if delta is None:
        delta = gap / 4 if gap is not None else mpq(1, 4)
    delta = Q(delta)
    floor = max(abs(p) for p in pts) + 2 * delta
    K = max(Q(K), floor) if K is not None else max(floor, max(abs(f.left), abs(f.right)) + 1)
    return ExclusionRegion(partition, delta, K)


# ---------------------------------------------------------------------------
# decomposition M = max(M1, M2)

@dataclass
class DecompositionReport:
    samples: int
    residual_failures: list
    classes: dict
    measures: dict
    region: dict
    points: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return not self.residual_failures

    def to_dict(self):
        return {
            "passed": self.passed,
            "samples": self.samples,
            "max_identity_residual": "0" if self.passed else "nonzero",
            "residual_failures": self.residual_failures,
            "classes": self.classes,
            "measures": self.measures,
            "region": self.region,
        }


def _classify(f, partition, x):
    dec = decompose(f, partition, x)
    if dec.m1 is None:
        return x, None, 0
    best = dec.m1.value if cmp(dec.m1.value, dec.m2.value) >= 0 else dec.m2.value
    residual_zero = cmp(best, dec.m.value) == 0
    return x, residual_zero, cmp(dec.m1.value, dec.m2.value)


def verify_decomposition(f: PiecewiseLinearFn, partition: Partition, region: Optional[ExclusionRegion] = None,
                         grid: Optional[Sequence] = None, workers: Optional[int] = None) -> DecompositionReport:
    """Check max(M1 f, M2 f) == Mf exactly at every sampled x outside P and
    sort the samples of U into X (M1 > M2), Y (M1 = M2), Z (M1 < M2)."""
    if grid is None:
        grid = build_grid(default_grid_spec(f, "1/20"), avoid=partition.points)
    grid = [Q(x) for x in grid]
    results = map_points(partial(_classify, f, partition), grid, workers)
    failures, classes = [], {"X": 0, "Y": 0, "Z": 0}
    points = []
    for x, ok, order in results:
        if ok is None:
            continue
        if not ok:
            failures.append(format_rational(x))
        label = "X" if order > 0 else ("Z" if order < 0 else "Y")
        if region is None or region.contains(x):
            classes[label] += 1
            points.append((x, label))
    step = float(grid[1] - grid[0]) if len(grid) > 1 else 0.0
    measures = {k: v * step for k, v in classes.items()}
    return DecompositionReport(
        samples=len(grid),
        residual_failures=failures,
        classes=classes,
        measures=measures,
        region=region.to_dict() if region is not None else None,
        points=points,
    )


# ---------------------------------------------------------------------------
# M1: line subtraction and the derivative bound

def canonical_line(partition: Partition, i: int):
    """(slope, anchor) of L_i(x) = slope * (x - anchor), nonpositive on gap i.

    anchor is the right end for nonnegative slopes and the left end otherwise;
    unbounded gaps have slope 0.
    """
    alpha = partition.slopes[i]
    lo, hi = partition.gap(i)
    if alpha == 0 or lo is None or hi is None:
        return mpq(0), mpq(0)
    return alpha, (hi if alpha > 0 else lo)


def _minus_line_on_gap(f: PiecewiseLinearFn, lo, hi, alpha, anchor, ramp=1) -> PiecewiseLinearFn:
    """A piecewise-linear function equal to f - L on [lo, hi], ramping to 0 outside."""
    ramp = Q(ramp)
    inner = sorted({lo, hi} | {b for b in f.breakpoints if lo < b < hi})
    vals = [evaluate(f, t) - alpha * (t - anchor) for t in inner]
    bps = [lo - ramp] + inner + [hi + ramp]
    return make_piecewise_linear(bps, [mpq(0)] + vals + [mpq(0)])


@dataclass
class LineSubtractionReport:
    gaps_checked: int
    samples: int
    failures: list

    @property
    def passed(self):
        return not self.failures

    def to_dict(self):
        return {"passed": self.passed, "gaps_checked": self.gaps_checked, "samples": self.samples,
                "failures": self.failures}


def verify_line_subtraction(f: PiecewiseLinearFn, partition: Partition, per_gap: int = 5,
                            tail_span=2) -> LineSubtractionReport:
    """M1(f - L_i)(x) - (M1 f(x) - L_i(x)) == 0 exactly at sample points of each gap."""
    failures, samples = [], 0
    n_gaps = len(partition.points) + 1
    for i in range(n_gaps):
        lo, hi = partition.gap(i)
        alpha, anchor = canonical_line(partition, i)
        a = lo if lo is not None else hi - Q(tail_span)
        b = hi if hi is not None else lo + Q(tail_span)
        if lo is None or hi is None:
            g = f  # L_i is identically zero on unbounded gaps
        else:
            g = _minus_line_on_gap(f, lo, hi, alpha, anchor)
        for k in range(1, per_gap + 1):
            # avoid the midpoint: fractions k/(per_gap+1) shifted by 1/(7*(per_gap+1))
            x = a + (b - a) * (Q(k) / (per_gap + 1) + mpq(1, 7 * (per_gap + 1)))
            if not (a < x < b):
                continue
            lhs = m1_touch(g, partition, x).value
            rhs = m1_touch(f, partition, x).value - alpha * (x - anchor)
            samples += 1
            if cmp(lhs, rhs) != 0:
                failures.append({"gap": i, "x": format_rational(x), "lhs": float(lhs), "rhs": float(rhs)})
    return LineSubtractionReport(n_gaps, samples, failures)


@dataclass
class M1BoundReport:
    epsilon: float
    C: float
    approximation_error: float
    derivative_gap: float  # ||f_j' - f'||_1
    precondition_ok: bool
    m1_distance: float  # ||(M1 f_j)' - f_j'||_1 on the grid
    bound: float  # 2(C+1) epsilon
    ratio: float
    skipped_measure: float
    line_subtraction: dict

    @property
    def passed(self):
        return self.line_subtraction["passed"] and (not self.precondition_ok or self.ratio <= 1)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def verify_m1_bound(fj: PiecewiseLinearFn, f: PiecewiseLinearFn, epsilon, C=100,
                    grid: Optional[Sequence] = None, coarsen: bool = False) -> M1BoundReport:
    """Line-subtraction identity on every gap plus ||(M1 f_j)' - f_j'||_1 against 2(C+1)eps."""
    epsilon = Q(epsilon)
    _, partition, err = simple_approximation(f, epsilon, coarsen=coarsen)
    dgap = step_distance(derivative(fj), derivative(f))
    ident = verify_line_subtraction(fj, partition)
    if grid is None:
        lo = min(fj.left, f.left) - 1
        hi = max(fj.right, f.right) + 1
        grid = build_grid(GridSpec(lo, hi, mpq(1, 50)), avoid=partition.points)
    op = Operator("M1", partition=partition)
    terms, skipped = [], []
    diffs = []
    for x in grid:
        if partition.gap_index(x) < 0:
            diffs.append(None)
            continue
        touch = m1_touch(fj, partition, x)
        d, source = _derivative_for(fj, op, touch)
        diffs.append(None if d is None else abs(float(d) - float(slope_at(fj, x))))
    for k in range(len(grid) - 1):
        h = float(grid[k + 1] - grid[k])
        if diffs[k] is None or diffs[k + 1] is None:
            skipped.append(h)
        else:
            terms.append(0.5 * (diffs[k] + diffs[k + 1]) * h)
    dist = math.fsum(terms)
    bound = 2 * (float(C) + 1) * float(epsilon)
    return M1BoundReport(
        epsilon=float(epsilon),
        C=float(C),
        approximation_error=float(err),
        derivative_gap=float(dgap),
        precondition_ok=dgap < epsilon,
        m1_distance=dist,
        bound=bound,
        ratio=dist / bound,
        skipped_measure=math.fsum(skipped),
        line_subtraction=ident.to_dict(),
    )


# ---------------------------------------------------------------------------
# M2 regularity on U_{delta,K}

@dataclass
class M2RegularityReport:
    samples: int
    radius_violations: list
    derivative_violations: list
    lipschitz_violations: list
    derivative_bound: float
    lipschitz_constant: float
    max_abs_derivative: float
    max_pair_ratio: float
    region: dict

    @property
    def passed(self):
        return not (self.radius_violations or self.derivative_violations or self.lipschitz_violations)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _m2_sample(f, partition, x):
    touch = m2_touch(f, partition, x)
    deriv = None
    if partition.gap_side(x) in ("left", "right"):
        deriv = m2_derivative_formula(f, partition, touch)
    return touch, deriv


def verify_m2_regularity(f: PiecewiseLinearFn, partition: Partition, delta, K,
                         grid: Optional[Sequence] = None, workers: Optional[int] = None) -> M2RegularityReport:
    """On U_{delta,K}: every M2 touch has radius >= delta, every sampled
    derivative obeys ||f||_1/(2 delta^2) + ||f||_inf/delta, and M2 f is
    Lipschitz with constant ||f||_1/(2 delta^2) on each component."""
    region = ExclusionRegion(partition, delta, K)
    delta = region.delta
    if grid is None:
        avoid = tuple(partition.points) + partition.midpoints()
        grid = build_grid(GridSpec(-region.cutoff, region.cutoff, mpq(1, 20)), avoid=avoid)
    pts = [Q(x) for x in grid if region.contains(Q(x))]
    l1, sup = norm_l1(f), norm_sup(f)
    dbound = l1 / (2 * delta * delta) + sup / delta
    lip = l1 / (2 * delta * delta)
    results = map_points(partial(_m2_sample, f, partition), pts, workers)
    rad_v, der_v, lip_v = [], [], []
    max_d = 0.0
    for x, (touch, deriv) in zip(pts, results):
        if touch.attained_at_limit or cmp(touch.radius, delta) < 0:
            rad_v.append(format_rational(x))
        if deriv is not None:
            max_d = max(max_d, abs(float(deriv)))
            if cmp(abs(deriv), dbound) > 0:
                der_v.append(format_rational(x))
    comps = [region.component(x) for x in pts]
    vals = [t.value for t, _ in results]
    # consecutive pairs inside a component; all other pairs follow by the triangle inequality
    for k in range(len(pts) - 1):
        if comps[k] != comps[k + 1]:
            continue
        diff = vals[k + 1] - vals[k] if _same_radicand(vals[k + 1], vals[k]) else None
        allowed = lip * (pts[k + 1] - pts[k])
        if diff is not None:
            bad = cmp(abs(diff), allowed) > 0
        else:
            bad = cmp(vals[k + 1], vals[k] + allowed) > 0 or cmp(vals[k], vals[k + 1] + allowed) > 0
        if bad:
            lip_v.append([format_rational(pts[k]), format_rational(pts[k + 1])])
    max_ratio = _max_pair_ratio(pts, vals, comps)
    return M2RegularityReport(
        samples=len(pts),
        radius_violations=rad_v,
        derivative_violations=der_v,
        lipschitz_violations=lip_v,
        derivative_bound=float(dbound),
        lipschitz_constant=float(lip),
        max_abs_derivative=max_d,
        max_pair_ratio=max_ratio,
        region=region.to_dict(),
    )


def _same_radicand(a, b) -> bool:
    sa = a.s if isinstance(a, Surd) else None
    sb = b.s if isinstance(b, Surd) else None
    return sa is None or sb is None or sa == sb


def _max_pair_ratio(pts, vals, comps) -> float:
    """Largest |M2(x) - M2(y)| / |x - y| over all sampled pairs in one component (float)."""
    xs = np.array([float(x) for x in pts])
    vs = np.array([float(v) for v in vals])
    cs = np.array(comps)
    best = 0.0
    for c in np.unique(cs):
        idx = np.where(cs == c)[0]
        if len(idx) < 2:
            continue
        x, v = xs[idx], vs[idx]
        dx = np.abs(x[:, None] - x[None, :])
        dv = np.abs(v[:, None] - v[None, :])
        mask = dx > 0
        best = max(best, float(np.max(dv[mask] / dx[mask])))
    return best


# ---------------------------------------------------------------------------
# the continuity experiment

@dataclass
class ContinuityRecord:
    j: int
    sobolev_gap: float
    derivative_l1_gap: float  # ||f_j' - f'||_1
    sup_gap: float  # max over the grid of |Mf_j - Mf|
    sup_bound: float  # ||f_j' - f'||_1 / 2
    sup_ok: bool
    derivative_gap: float
    derivative_gap_U: float
    m1_gap_U: float
    m2_gap_U: float
    skipped_measure: float
    tail_allowance: float
    radius_stable_fraction: Optional[float] = None


@dataclass
class ContinuityReport:
    kind: str
    records: list
    epsilon: float
    delta: mpq
    K: mpq
    grid: str
    grid_points: int
    partition_size: int
    j0: Optional[int]
    decrease_ratio: Optional[float]
    decrease_ok: bool
    sup_ok: bool
    radius_stability: dict
    note: str = ("the factor-10 decrease of derivative_gap between the first and last j is an "
                 "experimental threshold; no convergence rate is claimed")

    @property
    def passed(self) -> bool:
        return self.decrease_ok and self.sup_ok

    def to_dict(self):
        return {
            "passed": self.passed,
            "kind": self.kind,
            "epsilon": self.epsilon,
            "delta": format_rational(self.delta),
            "K": format_rational(self.K),
            "grid": self.grid,
            "grid_points": self.grid_points,
            "partition_size": self.partition_size,
            "j0": self.j0,
            "decrease_ratio": self.decrease_ratio,
            "decrease_ok": self.decrease_ok,
            "sup_ok": self.sup_ok,
            "radius_stability": self.radius_stability,
            "note": self.note,
            "records": [asdict(r) for r in self.records],
        }

    def summary_rows(self) -> list:
        cols = list(ContinuityRecord.__dataclass_fields__)
        rows = [cols]
        for r in self.records:
            rows.append([_cell(getattr(r, c)) for c in cols])
        return rows


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def _decomposition_record(f, partition, x):
    """(M touch, M derivative, M1 derivative, M2 derivative) at x."""
    dec = decompose(f, partition, x)
    ops = _decomposition_record.ops.get(id(partition))
    if ops is None or ops[0] is not partition:
        ops = (partition, Operator("M"), Operator("M1", partition=partition), Operator("M2", partition=partition))
        _decomposition_record.ops[id(partition)] = ops
    _, om, o1, o2 = ops
    dm = _derivative_for(f, om, dec.m)
    d1 = _derivative_for(f, o1, dec.m1) if dec.m1 is not None else (None, "gap")
    d2 = _derivative_for(f, o2, dec.m2)
    return dec.m, dm, d1, d2


_decomposition_record.ops = {}


def _profiles(f, partition, grid, workers):
    recs = map_points(partial(_decomposition_record, f, partition), grid, workers)
    out = {}
    for name, idx in (("M", 1), ("M1", 2), ("M2", 3)):
        if name == "M":
            touches = [r[0] for r in recs]
            values = tuple(t.value for t in touches)
            radii = tuple(t.radius for t in touches)
            kinds = tuple(t.kind for t in touches)
            sigs = tuple(t.signature for t in touches)
        else:
            values = tuple(mpq(0) for _ in recs)
            radii = tuple(mpq(0) for _ in recs)
            kinds = tuple("n/a" for _ in recs)
            sigs = ()
        derivs = tuple(r[idx][0] for r in recs)
        sources = tuple(r[idx][1] for r in recs)
        out[name] = GridProfile(name, tuple(grid), values, radii, kinds, derivs, sources, sigs,
                                step=float(grid[1] - grid[0]) if len(grid) > 1 else None)
    return out


def _sequence(f, kind, seed) -> Callable[[int], PiecewiseLinearFn]:
    if callable(kind):
        return kind
    if kind == "identity":
        return lambda j: f
    return lambda j: perturbation_sequence(f, kind, j, seed).fn


def run_continuity(f: PiecewiseLinearFn, sequence_kind: Union[str, Callable] = "bump",
                   j_list: Sequence[int] = (1, 2, 4, 8, 16, 32, 64), epsilon="1/10",
                   grid_spec: Optional[GridSpec] = None, seed: int = 0, radius_tol: float = 1e-3,
                   workers: Optional[int] = None) -> ContinuityReport:
    """Compare (Mf_j)' with (Mf)' along a sequence f_j -> f in W^{1,1}."""
    if f.is_zero():
        raise ValueError("the continuity experiment needs a nonzero f")
    if any(v < 0 for v in f.values):
        raise ValueError("the continuity experiment needs a nonnegative f")
    j_list = [int(j) for j in j_list]
    if not j_list or any(j < 1 for j in j_list) or any(a >= b for a, b in zip(j_list, j_list[1:])):
        raise ValueError("j list must be nonempty, positive and strictly increasing")
    epsilon = Q(epsilon)
    _, partition, _ = simple_approximation(f, epsilon)
    tail = find_tail_bound(f, epsilon)
    near = find_near_point_delta(f, partition.points, epsilon)
    region = default_region(f, partition, near.delta, tail.K)
    spec = grid_spec or default_grid_spec(f)
    avoid = tuple(partition.points) + partition.midpoints()
    grid = build_grid(spec, avoid=avoid)
    seq = _sequence(f, sequence_kind, seed)
    base = _profiles(f, partition, grid, workers)
    edge_l, edge_r = grid[0], grid[-1]
    f_norm = norm_sobolev(f)
    fprime = derivative(f)
    records, j0 = [], None
    last_touches = None
    last_fj = None
    for j in j_list:
        fj = seq(j)
        prof = _profiles(fj, partition, grid, workers)
        dgap = step_distance(derivative(fj), fprime)
        sob = norm_sobolev(subtract(fj, f))
        sup_bound = dgap / 2
        sup_ok, sup_gap = True, 0.0
        for a, b in zip(prof["M"].values, base["M"].values):
            sup_gap = max(sup_gap, abs(float(a) - float(b)))
            if cmp(a, b + sup_bound) > 0 or cmp(b, a + sup_bound) > 0:
                sup_ok = False
        if j0 is None and dgap < epsilon and norm_sobolev(fj) <= 2 * f_norm:
            j0 = j
        full = l1_derivative_distance(prof["M"], base["M"])
        on_u = l1_derivative_distance(prof["M"], base["M"], region)
        g1 = l1_derivative_distance(prof["M1"], base["M1"], region)
        g2 = l1_derivative_distance(prof["M2"], base["M2"], region)
        allowance = _outside_grid_variation(f, edge_l, edge_r) + _outside_grid_variation(fj, edge_l, edge_r)
        records.append(ContinuityRecord(
            j=j, sobolev_gap=float(sob), derivative_l1_gap=float(dgap), sup_gap=sup_gap,
            sup_bound=float(sup_bound), sup_ok=sup_ok, derivative_gap=full.distance,
            derivative_gap_U=on_u.distance, m1_gap_U=g1.distance, m2_gap_U=g2.distance,
            skipped_measure=full.skipped_measure, tail_allowance=allowance,
        ))
        last_touches, last_fj = prof["M"], fj
    stability = _radius_stability(f, grid, base["M"], last_touches, radius_tol)
    records[-1].radius_stable_fraction = stability["stable_fraction"]
    first, last = records[0].derivative_gap, records[-1].derivative_gap
    if first == 0:
        ratio = 0.0 if last == 0 else math.inf
        decrease_ok = last == 0
    else:
        ratio = last / first
        decrease_ok = last < first / 10
    return ContinuityReport(
        kind=sequence_kind if isinstance(sequence_kind, str) else "custom",
        records=records,
        epsilon=float(epsilon),
        delta=region.delta,
        K=region.cutoff,
        grid=str(spec),
        grid_points=len(grid),
        partition_size=len(partition.points),
        j0=j0,
        decrease_ratio=ratio,
        decrease_ok=decrease_ok,
        sup_ok=all(r.sup_ok for r in records),
        radius_stability=stability,
    )


def _outside_grid_variation(f, lo, hi) -> float:
    """Variation of Mf outside [lo, hi] when the grid covers the support (else nan)."""
    if lo > f.left or hi < f.right:
        return math.nan
    return float(maximal(f, lo)) + float(maximal(f, hi))


def _radius_stability(f, grid, base: GridProfile, last: GridProfile, tol: float) -> dict:
    """Compare the last f_j's optimal radii with the maximiser set of f.

    At points without a radius jump in either profile, count how often r_{j,x}
    is within ``tol`` of some maximising radius of f at x, and how often the
    average of f over the window of radius r_{j,x} is within 1e-6 of Mf(x).
    """
    checked = close = near_opt = 0
    for k, x in enumerate(grid):
        if base.jumps[k] or last.jumps[k]:
            continue
        checked += 1
        rj = last.radii[k]
        cands = _scan(f, x)
        top = _argmax([c for c in cands if c.kind != "cut"])
        maximisers = [c.radius for c in cands if c.kind != "cut" and cmp(c.value, top.value) == 0]
        if min(abs(float(r) - float(rj)) for r in maximisers) <= tol:
            close += 1
        if rj == 0:
            val = float(evaluate(f, x))
        else:
            val = float((f.antiderivative(x + rj) - f.antiderivative(x - rj)) / (2 * rj))
        if float(top.value) - val <= 1e-6:
            near_opt += 1
    return {
        "checked": checked,
        "stable": close,
        "stable_fraction": close / checked if checked else None,
        "near_optimal": near_opt,
        "tolerance": tol,
    }


# ---------------------------------------------------------------------------
# engine cross-checks: Luiro formula vs finite differences, exact vs oracle

@dataclass
class LuiroReport:
    h: float
    tolerance: float
    eligible: int
    passed_count: int
    excluded: int
    failures: list
    constant_structure_failures: list

    @property
    def pass_fraction(self) -> float:
        return self.passed_count / self.eligible if self.eligible else 1.0

    @property
    def passed(self) -> bool:
        return self.pass_fraction >= 0.95 and not self.constant_structure_failures

    def to_dict(self):
        d = asdict(self)
        d["pass_fraction"] = self.pass_fraction
        d["passed"] = self.passed
        return d


def _luiro_sample(f, h, x):
    mid = best_radius(f, x)
    lo = best_radius(f, x - h)
    hi = best_radius(f, x + h)
    fd = (float(hi.value) - float(lo.value)) / (2 * float(h))
    d = None if mid.attained_at_limit else float(luiro_derivative(f, mid))
    same = lo.signature == mid.signature == hi.signature
    return mid.kind, float(mid.radius), d, fd, same


def verify_luiro(f: PiecewiseLinearFn, grid: Optional[Sequence] = None, h="1/100000", tol: float = 1e-4,
                 workers: Optional[int] = None) -> LuiroReport:
    """Luiro's formula against a central difference of the exact Mf.

    Limit-zero points and points next to a radius jump are excluded; among
    the rest at least 95% must agree within ``tol`` and every point whose
    touch signature is the same at x - h, x, x + h must agree.
    """
    h = Q(h)
    if grid is None:
        grid = build_grid(default_grid_spec(f, "1/20"), avoid=f.breakpoints)
    grid = [Q(x) for x in grid]
    res = map_points(partial(_luiro_sample, f, h), grid, workers)
    radii = [r[1] for r in res]
    step = float(grid[1] - grid[0]) if len(grid) > 1 else 1.0
    jump = [False] * len(grid)
    for k in range(len(grid) - 1):
        if abs(radii[k + 1] - radii[k]) > 10 * step:
            jump[k] = jump[k + 1] = True
    eligible = ok = excluded = 0
    failures, hard = [], []
    for k, (x, (kind, _, d, fd, same)) in enumerate(zip(grid, res)):
        if d is None or jump[k]:
            excluded += 1
            continue
        eligible += 1
        if abs(d - fd) <= tol:
            ok += 1
            continue
        item = {"x": format_rational(x), "luiro": d, "finite_difference": fd, "kind": kind}
        failures.append(item)
        if same:
            hard.append(item)
    return LuiroReport(float(h), tol, eligible, ok, excluded, failures, hard)


@dataclass
class OracleReport:
    functions: int
    samples: int
    max_excess: float  # largest (|exact - oracle| - bound - 1e-6), negative when all pass
    violations: list
    below_oracle: list  # exact value smaller than the oracle's feasible maximum

    @property
    def passed(self) -> bool:
        return not self.violations and not self.below_oracle

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def sample_points(f: PiecewiseLinearFn, count: int, seed: int, margin=2, denominator: int = 1000) -> list:
    """``count`` seeded rational points in [left - margin, right + margin]."""
    rng = np.random.default_rng(seed)
    lo = (f.left - Q(margin)) * denominator
    hi = (f.right + Q(margin)) * denominator
    ints = rng.integers(int(lo), int(hi) + 1, size=count)
    return [mpq(int(k), denominator) for k in ints]


def verify_oracle(functions: Sequence[PiecewiseLinearFn], points_per_function: int = 100, seed: int = 0,
                  cfg=None, abs_tol: float = 1e-6) -> OracleReport:
    """|maximal - oracle_maximal| <= abs_tol + discretisation bound at seeded points."""
    from .oracle import OracleConfig, oracle_maximal

    cfg = cfg or OracleConfig()
    violations, below = [], []
    worst = -math.inf
    n = 0
    for i, f in enumerate(functions):
        for x in sample_points(f, points_per_function, seed + i):
            exact = float(maximal(f, x))
            ref = oracle_maximal(f, x, cfg)
            n += 1
            excess = abs(exact - ref.value) - ref.bound - abs_tol
            worst = max(worst, excess)
            item = {"function": i, "x": format_rational(x), "exact": exact, "oracle": ref.value,
                    "bound": ref.bound}
            if excess > 0:
                violations.append(item)
            if exact < ref.value - abs_tol:
                below.append(item)
    return OracleReport(len(functions), n, worst, violations, below)
