import math

import pytest

from maxlab.deriv import near_point_variation, tail_variation
from maxlab.exact import Q, mpq
from maxlab.experiments import (
    GridSpec,
    build_grid,
    canonical_line,
    default_region,
    find_near_point_delta,
    find_tail_bound,
    run_continuity,
    verify_decomposition,
    verify_line_subtraction,
    verify_luiro,
    verify_m1_bound,
    verify_m2_regularity,
    verify_oracle,
)
from maxlab.fnspace import Partition, make_piecewise_linear, perturbation_sequence, tent


def test_grid_spec_parse_and_count():
    spec = GridSpec.parse("-4:4:0.01")
    assert spec.step == mpq(1, 100)
    assert len(build_grid(spec)) == 801
    assert str(spec) == "-4:4:1/100"
    for bad in ("1:2", "0:1:0", "2:1:1", "a:b:c"):
        with pytest.raises(ValueError):
            GridSpec.parse(bad)


def test_grid_avoids_points():
    P = Partition.of_points([-1, 0, 1])
    grid = build_grid(GridSpec(-2, 2, Q("1/4")), avoid=tuple(P.points) + P.midpoints())
    assert not set(grid) & {-1, 0, 1, Q("-1/2"), Q("1/2")}
    assert grid[1] - grid[0] == Q("1/4")


def test_continuity_tent_bump(T):
    rep = run_continuity(T, "bump", [1, 2, 4, 8, 16, 32, 64], Q("1/10"))
    gaps = [r.derivative_gap for r in rep.records]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < gaps[0] / 10
    assert rep.sup_ok and rep.passed
    assert rep.j0 is not None
    assert [r.sobolev_gap for r in rep.records] == [2.5 / j for j in (1, 2, 4, 8, 16, 32, 64)]
    assert rep.radius_stability["checked"] > 0
    assert "no convergence rate" in rep.note


def test_continuity_identity_sequence(T):
    rep = run_continuity(T, "identity", [1, 2, 4], Q("1/10"))
    for r in rep.records:
        assert r.sobolev_gap == 0 and r.sup_gap == 0 and r.derivative_gap == 0 and r.derivative_gap_U == 0
    assert rep.passed


def test_continuity_input_validation(T):
    with pytest.raises(ValueError):
        run_continuity(make_piecewise_linear([0, 1], [0, 0]), "bump", [1, 2])
    with pytest.raises(ValueError):
        run_continuity(T, "bump", [2, 1])
    with pytest.raises(ValueError):
        run_continuity(T, "bump", [0, 1])


def test_continuity_summary_rows(T):
    rep = run_continuity(T, "shift", [1, 8], Q("1/10"), GridSpec(-3, 3, Q("1/50")))
    rows = rep.summary_rows()
    assert rows[0][0] == "j" and len(rows) == 3
    d = rep.to_dict()
    assert d["grid"] == "-3:3:1/50" and len(d["records"]) == 2


def test_decomposition_tent(T):
    P = Partition.of_points([-1, 0, 1])
    rep = verify_decomposition(T, P, default_region(T, P))
    assert rep.passed and rep.residual_failures == []
    assert sum(rep.classes.values()) == len(rep.points)


def test_decomposition_far_points_are_z(T):
    P = Partition.of_points([0])
    rep = verify_decomposition(T, P, None, [Q(5), Q(6), Q(-7)])
    assert rep.classes["Z"] == 3


def test_decomposition_x_class_near_mass():
    # tall narrow spike next to a partition point far from the rest of the mass
    f = make_piecewise_linear([-1, Q("-1/10"), 0, Q("1/10"), 1], [0, 0, 5, 0, 0])
    P = Partition.of_points([-1, 1])
    rep = verify_decomposition(f, P, None, [Q("1/100"), Q("-1/50")])
    assert rep.classes["X"] == 2


def test_canonical_line_nonpositive():
    P = Partition([-1, 0, 1], [0, 1, -1, 0])
    for i in range(4):
        alpha, c = canonical_line(P, i)
        lo, hi = P.gap(i)
        for t in (lo, hi):
            if t is not None:
                assert alpha * (t - c) <= 0


def test_line_subtraction_tent(T):
    P = Partition.of_points([-1, 0, 1])
    P = Partition(P.points, [0, 1, -1, 0])
    rep = verify_line_subtraction(T, P)
    assert rep.passed and rep.samples > 0


def test_m1_bound_identity_and_bump(T):
    rep = verify_m1_bound(T, T, Q("1/10"))
    assert math.isfinite(rep.ratio) and rep.approximation_error == 0 and rep.passed
    fj = perturbation_sequence(T, "bump", 64).fn
    rep = verify_m1_bound(fj, T, Q("1/10"), C=100)
    assert rep.precondition_ok and rep.ratio <= 1 and rep.passed


def test_m2_regularity_tent(T):
    rep = verify_m2_regularity(T, Partition.of_points([0]), Q("1/4"), 8)
    assert rep.passed and rep.samples > 0
    assert rep.max_pair_ratio <= rep.lipschitz_constant


def test_m2_regularity_bound_monotone_in_delta(T):
    P = Partition.of_points([0])
    a = verify_m2_regularity(T, P, Q("1/4"), 8)
    b = verify_m2_regularity(T, P, Q("1/2"), 8)
    assert b.lipschitz_constant < a.lipschitz_constant and b.derivative_bound < a.derivative_bound


def test_m2_regularity_zero_function():
    z = make_piecewise_linear([0, 1], [0, 0])
    rep = verify_m2_regularity(z, Partition.of_points([Q("1/2")]), Q("1/4"), 4)
    assert rep.passed and rep.max_abs_derivative == 0


def test_m2_regularity_rejects_bad_region(T):
    with pytest.raises(ValueError):
        verify_m2_regularity(T, Partition.of_points([0, Q("1/4")]), Q("1/4"), 8)


def test_tail_bound(T):
    sel = find_tail_bound(T, Q("1/2"))
    assert tail_variation(T, sel.K) < 0.25
    assert find_tail_bound(T, 100).K == 1
    assert find_tail_bound(T, Q("1/100")).K >= find_tail_bound(T, Q("1/10")).K
    with pytest.raises(ValueError):
        find_tail_bound(T, 0)


def test_near_point_delta(T):
    pts = [-1, 0, 1]
    sel = find_near_point_delta(T, pts, Q("1/2"))
    assert sel.delta < Q("1/2")
    assert sum(near_point_variation(T, p, sel.delta, sel.delta / 8) for p in pts) < 0.25
    assert sel.escaping_violations == 0
    assert find_near_point_delta(T, pts, Q("1/20")).delta <= sel.delta


def test_luiro_verifier_on_tent(T):
    rep = verify_luiro(T)
    assert rep.passed and rep.eligible > 0


def test_oracle_verifier_small(T, full_corpus):
    rep = verify_oracle([T] + full_corpus[:2], points_per_function=10)
    assert rep.passed and rep.samples == 30
