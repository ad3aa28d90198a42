import pytest
from hypothesis import given, settings

from maxlab.exact import Q, mpq
from maxlab.fnspace import (
    ExclusionRegion,
    Partition,
    PiecewiseLinearFn,
    ValidationError,
    add,
    clamp_nonnegative,
    corpus,
    derivative,
    evaluate,
    make_piecewise_linear,
    norm_l1,
    norm_sobolev,
    norm_sup,
    perturbation_sequence,
    scale,
    simple_approximation,
    step_distance,
    subtract,
    tent,
)

from conftest import pl_functions


def test_tent_construction(T):
    assert T.breakpoints == (-1, 0, 1)
    assert T.values == (0, 1, 0)


def test_zero_function_is_valid():
    z = make_piecewise_linear([0, 1], [0, 0])
    assert z.is_zero()


@pytest.mark.parametrize(
    "bps, vals",
    [([0, 1], [0, 1]), ([0, 2, 1], [0, 1, 0]), ([0, 1], [0, 0, 0]), ([0], [0]), ([0, 1, 2], [0, -1, 0])],
)
def test_invalid_functions_rejected(bps, vals):
    with pytest.raises(ValidationError):
        make_piecewise_linear(bps, vals)


def test_signed_functions_allowed_without_flag():
    f = make_piecewise_linear([0, 1, 2], [0, -1, 0], nonnegative=False)
    assert evaluate(f, 1) == -1


def test_eval(T):
    assert evaluate(T, 0) == 1
    assert evaluate(T, Q("1/2")) == Q("1/2")
    assert evaluate(T, 5) == 0
    assert evaluate(T, -1) == 0


def test_derivative(T):
    d = derivative(T)
    assert d(Q("-1/2")) == 1 and d(Q("1/2")) == -1 and d(3) == 0 and d(-3) == 0
    assert derivative(make_piecewise_linear([0, 1], [0, 0])).norm_l1() == 0
    g = derivative(make_piecewise_linear([0, 1, 2], [0, 3, 0]))
    assert g(Q("1/2")) == 3 and g(Q("3/2")) == -3


def test_norms(T):
    assert norm_l1(T) == 1
    assert norm_sobolev(T) == 3
    assert norm_sup(T) == 1


def test_json_round_trip_is_exact(T):
    text = '{"breakpoints":["-1","0.5","7/3"],"values":["0","1/3","0"]}'
    f = PiecewiseLinearFn.from_json(text)
    assert f.breakpoints[1] == Q("1/2") and f.breakpoints[2] == mpq(7, 3)
    again = PiecewiseLinearFn.from_json(f.to_json())
    assert again == f and again.to_json() == f.to_json()
    assert PiecewiseLinearFn.from_json(T.to_json()) == T


def test_simple_approximation_default_is_exact(T):
    g, P, err = simple_approximation(T, Q("1/10"))
    assert err == 0
    assert P.points == (-1, 0, 1)
    assert step_distance(g, derivative(T)) == 0
    assert P.slopes[0] == 0 and P.slopes[-1] == 0


def test_simple_approximation_coarsened(T):
    g, P, err = simple_approximation(T, 3, coarsen=True)
    assert err == 2
    assert step_distance(g, derivative(T)) == 2
    assert len(P.points) < 3


def test_simple_approximation_rejects_zero():
    with pytest.raises(ValueError):
        simple_approximation(make_piecewise_linear([0, 1], [0, 0]), 1)


def test_bump_gap_is_exact(T):
    for j in (1, 2, 4, 64):
        p = perturbation_sequence(T, "bump", j)
        assert norm_sobolev(subtract(p.fn, T)) == mpq(5, 2 * j)
        assert p.gap == mpq(5, 2 * j)


@pytest.mark.parametrize("kind", ["bump", "shift", "dilation", "noise"])
def test_perturbations_converge_and_stay_nonnegative(kind, T):
    f = corpus(3)[1]
    gaps = []
    for j in (1, 2, 4, 8, 16, 32, 64):
        p = perturbation_sequence(f, kind, j, seed=3)
        assert all(v >= 0 for v in p.fn.values)
        assert p.gap == norm_sobolev(subtract(p.fn, f))
        assert p.gap <= p.constant / j
        gaps.append(p.gap)
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < gaps[0]


def test_perturbation_is_deterministic(T):
    a = perturbation_sequence(T, "noise", 5, seed=11).fn
    b = perturbation_sequence(T, "noise", 5, seed=11).fn
    assert a == b


def test_unknown_perturbation_kind(T):
    with pytest.raises(ValueError):
        perturbation_sequence(T, "wiggle", 1)
    with pytest.raises(ValueError):
        perturbation_sequence(T, "bump", 0)


def test_clamp_retriangulates():
    f = make_piecewise_linear([0, 1, 2, 3], [0, 1, -1, 0], nonnegative=False)
    g = clamp_nonnegative(f)
    assert all(v >= 0 for v in g.values)
    assert Q("3/2") in g.breakpoints
    assert evaluate(g, Q("1/2")) == Q("1/2") and evaluate(g, 2) == 0


def test_add_and_scale(T):
    two = scale(T, 2)
    assert add(T, T) == two
    assert norm_l1(two) == 2


def test_partition_gaps_and_sides():
    P = Partition.of_points([-1, 0, 1])
    assert P.distance(Q("1/4")) == Q("1/4")
    assert P.gap_index(0) == -1
    assert P.gap_side(Q("3/4")) == "right"
    assert P.gap_side(Q("1/4")) == "left"
    assert P.gap_side(Q("1/2")) == "mid"
    assert P.gap_side(5) == "left"  # unbounded right gap: nearest point is on the left
    assert P.gap_side(-5) == "right"
    with pytest.raises(ValidationError):
        Partition([], [0])
    with pytest.raises(ValidationError):
        Partition([0], [1, 0])


def test_exclusion_region_validation():
    P = Partition.of_points([-1, 0, 1])
    U = ExclusionRegion(P, Q("1/4"), 4)
    assert U.contains(Q("1/2")) and not U.contains(Q("1/8")) and not U.contains(5)
    assert U.component(Q("1/2")) == 2
    with pytest.raises(ValidationError):
        ExclusionRegion(P, Q("1/2"), 4)  # neighbourhoods touch
    with pytest.raises(ValidationError):
        ExclusionRegion(P, Q("1/4"), Q("5/4"))


def test_antiderivative_round_trip(T):
    for f in corpus(5) + [T]:
        d = derivative(f)
        for b in f.breakpoints:
            assert d.integral(f.left, b) == evaluate(f, b)


def test_sup_bounded_by_half_variation(full_corpus, T):
    for f in full_corpus + [T]:
        assert 2 * norm_sup(f) <= derivative(f).norm_l1()


@settings(max_examples=60, deadline=None)
@given(pl_functions())
def test_sup_bound_property(f):
    assert 2 * norm_sup(f) <= derivative(f).norm_l1()


@settings(max_examples=40, deadline=None)
@given(pl_functions())
def test_simple_approximation_certificate(f):
    if f.is_zero():
        return
    for eps in (Q("1/10"), Q(1), Q(5)):
        g, P, err = simple_approximation(f, eps, coarsen=True)
        assert err == step_distance(g, derivative(f)) and err < eps
        assert P.slopes[0] == 0 and P.slopes[-1] == 0
