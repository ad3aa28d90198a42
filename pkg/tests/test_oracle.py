import math

import pytest

from maxlab.exact import Q
from maxlab.fnspace import make_piecewise_linear
from maxlab.maxops import maximal
from maxlab.oracle import OracleConfig, oracle_derivative, oracle_maximal, oracle_uncentered


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(radius_step=0)
    with pytest.raises(ValueError):
        OracleConfig(radius_max_factor=1.5)


def test_tent_values(T):
    assert abs(oracle_maximal(T, 0).value - 1) <= 1e-4
    assert abs(oracle_maximal(T, 2).value - 0.177124) <= 1e-4
    assert oracle_maximal(make_piecewise_linear([0, 1], [0, 0]), 3).value == 0


def test_oracle_never_exceeds_exact(full_corpus):
    for f in full_corpus[:5]:
        for x in (Q("-31/7"), Q("1/3"), Q("22/9")):
            ref = oracle_maximal(f, x)
            exact = float(maximal(f, x))
            assert ref.value <= exact + 1e-9  # float cancellation at tiny radii
            assert exact - ref.value <= ref.bound + 1e-6


def test_finite_difference_on_tent(T):
    d = oracle_derivative(lambda x: float(maximal(T, Q(x))), 2.0)
    assert abs(d + 0.066947) <= 1e-3
    line = oracle_derivative(lambda x: 3 * x - 1, 0.7)
    assert math.isclose(line, 3.0, rel_tol=1e-9)


def test_finite_difference_converges(T):
    g = lambda x: float(maximal(T, Q(x)))
    exact = -0.0669467  # Luiro value at x = 2
    errs = [abs(oracle_derivative(g, 2.0, OracleConfig(fd_step=h)) - exact) for h in (1e-3, 1e-4, 1e-5)]
    assert errs[2] <= errs[0]


def test_uncentered_oracle(T):
    cfg = OracleConfig(radius_step=1e-3)
    assert abs(oracle_uncentered(T, 0, cfg).value - 1) <= 1e-9
    u = oracle_uncentered(T, 2, cfg)
    c = oracle_maximal(T, 2, cfg)
    assert u.value >= c.value - c.bound
    assert u.value >= float(maximal(T, 2)) - u.bound


def test_deterministic(T):
    assert oracle_maximal(T, 1.3) == oracle_maximal(T, 1.3)
