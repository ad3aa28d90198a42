import math

import pytest

from maxlab.deriv import (
    GridProfile,
    l1_derivative_distance,
    luiro_derivative,
    m2_derivative_formula,
    near_point_variation,
    pinned_derivative,
    profile,
    tail_variation,
    total_variation,
    total_variation_centered,
    total_variation_exact_uncentered,
)
from maxlab.exact import Q, Surd, cmp, mpq
from maxlab.experiments import build_grid, GridSpec
from maxlab.fnspace import Partition, derivative, evaluate, make_piecewise_linear, tent
from maxlab.maxops import Operator, TouchSpec, average, best_radius, m2_touch, maximal
from maxlab.oracle import oracle_derivative

SQRT7 = Surd.sqrt(mpq(7))


def test_luiro_at_two(T):
    d = luiro_derivative(T, best_radius(T, 2))
    assert cmp(d, -evaluate(T, 2 - SQRT7) / (2 * SQRT7)) == 0
    assert math.isclose(float(d), -0.066947, abs_tol=1e-6)
    fd = oracle_derivative(lambda x: float(maximal(T, Q(x))), 2.0)
    assert abs(float(d) - fd) <= 1e-3


def test_luiro_limit_uses_right_slope(T):
    assert luiro_derivative(T, best_radius(T, 0)) == -1


def test_luiro_zero_function():
    z = make_piecewise_linear([0, 1], [0, 0])
    assert luiro_derivative(z, best_radius(z, 3)) == 0


def test_m2_formula_matches_luiro_at_two(T):
    P = Partition.of_points([0])
    t = m2_touch(T, P, 2)
    a = m2_derivative_formula(T, P, t)
    b = luiro_derivative(T, t)
    assert cmp(a, b) == 0


def test_m2_formula_mirror(T):
    P = Partition.of_points([0])
    right = m2_derivative_formula(T, P, m2_touch(T, P, 2))
    left = m2_derivative_formula(T, P, m2_touch(T, P, -2))
    assert cmp(left, -right) == 0


def test_m2_formula_preconditions(T):
    P = Partition.of_points([-1, 1])
    with pytest.raises(ValueError):
        m2_derivative_formula(T, P, m2_touch(T, P, 0))  # gap midpoint
    with pytest.raises(ValueError):
        m2_derivative_formula(T, P, m2_touch(T, P, 1))  # d = 0


def test_m2_formula_vanishing_window():
    f = make_piecewise_linear([10, 11, 12], [0, 1, 0])
    P = Partition.of_points([0])
    x, r = Q("-1/3"), Q("1/2")
    t = TouchSpec(x, r, average(f, x, r), "interior", False, False, ())
    assert t.value == 0
    assert m2_derivative_formula(f, P, t) == 0


def test_pinned_derivative_is_window_slope(T):
    # right end pinned at x + r = 3: average over [x - r, 3] as the centre moves
    x, r = Q("1/2"), Q("5/2")
    d = pinned_derivative(T, x, r, "right")
    h = Q("1/1000000")
    avg = lambda c: (T.antiderivative(3) - T.antiderivative(2 * c - 3)) / (6 - 2 * c)
    fd = (avg(x + h) - avg(x - h)) / (2 * h)
    assert abs(float(d) - float(fd)) < 1e-6


def test_profile_single_point(T):
    p = profile(T, [0], Operator("M"))
    assert p.values == (1,) and p.sources == ("f_prime",)


def test_profile_dominates_and_csv(T):
    grid = build_grid(GridSpec(-4, 4, Q("1/500")))
    assert len(grid) == 4001
    p = profile(T, grid, Operator("M"))
    assert min(p.fvalues) >= 0
    assert all(cmp(v, evaluate(T, x)) >= 0 for v, x in zip(p.values, grid))
    rows = p.csv_rows()
    assert rows[0][:6] == ["x", "value", "radius", "radius_kind", "derivative", "derivative_source"]
    assert len(rows) == 4002
    kinds = {r[3] for r in rows[1:]}
    assert kinds <= {"interior", "breakpoint_touch", "constraint_boundary", "limit_zero"}


def test_profile_zero_function():
    z = make_piecewise_linear([0, 1], [0, 0])
    P = Partition.of_points([Q("1/2")])
    for op in (Operator("M"), Operator("Mu"), Operator("M1", partition=P), Operator("M2", partition=P)):
        p = profile(z, [Q(-1), Q("1/4"), Q(3)], op)
        assert all(v == 0 for v in p.values)


def test_profile_grid_validation(T):
    with pytest.raises(ValueError):
        profile(T, [], Operator("M"))
    with pytest.raises(ValueError):
        profile(T, [1, 0], Operator("M"))


def test_luiro_tag_recomputable(T):
    grid = build_grid(GridSpec(-3, 3, Q("1/7")))
    p = profile(T, grid, Operator("M"))
    for x, r, d, s in zip(grid, p.radii, p.derivatives, p.sources):
        if s == "luiro":
            assert cmp(d, derivative(T).integral(x - r, x + r) / (2 * r)) == 0


def test_distance_metric_axioms(T):
    from maxlab.fnspace import perturbation_sequence

    grid = build_grid(GridSpec(-3, 3, Q("1/20")))
    op = Operator("M")
    p = profile(T, grid, op)
    q = profile(perturbation_sequence(T, "bump", 2).fn, grid, op)
    r = profile(perturbation_sequence(T, "shift", 3).fn, grid, op)
    assert l1_derivative_distance(p, p).distance == 0
    assert l1_derivative_distance(p, q).distance == l1_derivative_distance(q, p).distance
    assert l1_derivative_distance(p, r).distance <= (
        l1_derivative_distance(p, q).distance + l1_derivative_distance(q, r).distance + 1e-12
    )
    with pytest.raises(ValueError):
        l1_derivative_distance(p, profile(T, grid[:-1], op))


def test_distance_decreases_along_bump(T):
    from maxlab.fnspace import perturbation_sequence

    grid = build_grid(GridSpec(-3, 3, Q("1/50")))
    op = Operator("M")
    base = profile(T, grid, op)
    gaps = [l1_derivative_distance(profile(perturbation_sequence(T, "bump", j).fn, grid, op), base).distance
            for j in (1, 4, 16)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_total_variation_of_tent_profile(T):
    grid = build_grid(GridSpec(-2, 2, Q("1/1000")))
    vals = [evaluate(T, x) for x in grid]
    assert abs(total_variation(vals) - 2) <= 1e-3
    assert total_variation([0, 0, 0]) == 0


def test_uncentered_variation_of_tent(T):
    assert total_variation_exact_uncentered(T) <= 2 + 1e-12
    assert total_variation_centered(T) <= 2 + 1e-12


def test_tail_variation(T):
    K = Q(5)
    assert math.isclose(tail_variation(T, K), 2 * float(maximal(T, K)), rel_tol=1e-15)
    assert tail_variation(make_piecewise_linear([0, 1], [0, 0]), 3) == 0
    vals = [tail_variation(T, mpq(k, 4)) for k in range(1, 20)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_near_point_variation(T):
    vals = [near_point_variation(T, 0, mpq(1, 2 ** k), mpq(1, 2 ** (k + 4))) for k in range(1, 8)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert near_point_variation(make_piecewise_linear([0, 1], [0, 0]), 0, 1, Q("1/8")) == 0
    with pytest.raises(ValueError):
        near_point_variation(T, 0, 0, Q("1/8"))


def test_refinement_is_monotone(T):
    f = make_piecewise_linear([-2, -1, 0, Q("1/2"), 2], [0, 3, 1, 2, 0])
    vals = []
    for k in range(2, 7):
        grid = build_grid(GridSpec(-4, 4, mpq(1, 2 ** k)))
        vals.append(total_variation([maximal(f, x) for x in grid]))
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
