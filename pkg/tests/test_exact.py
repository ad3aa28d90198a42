import math

import pytest
from hypothesis import given, strategies as st

from maxlab.exact import Q, Surd, cmp, format_exact, format_rational, mpq, parse_rational, sign


def test_parse_decimal_and_fraction():
    assert parse_rational("0.25") == mpq(1, 4)
    assert parse_rational("-3/6") == mpq(-1, 2)
    assert Q(0.5) == mpq(1, 2)
    with pytest.raises(ValueError):
        parse_rational("abc")


def test_format_rational():
    assert format_rational(mpq(3)) == "3"
    assert format_rational(mpq(-2, 6)) == "-1/3"


def test_sqrt_normalises_perfect_squares():
    assert Surd.sqrt(mpq(9, 4)) == mpq(3, 2)
    assert isinstance(Surd.sqrt(mpq(7)), Surd)


def test_surd_arithmetic_and_float():
    r = Surd.sqrt(mpq(7))
    v = (r - 2) * (r + 2)
    assert v == 3
    assert math.isclose(float(1 / r), 1 / math.sqrt(7), rel_tol=1e-15)
    assert math.isclose(float(3 - r), 3 - math.sqrt(7), rel_tol=1e-15)


def test_mixed_radicands_rejected():
    with pytest.raises(ValueError):
        Surd.sqrt(mpq(2)) + Surd.sqrt(mpq(3))


def test_cross_radicand_comparison_is_exact():
    a = Surd.sqrt(mpq(2))
    b = Surd.sqrt(mpq(3))
    assert cmp(a, b) < 0
    assert cmp(Surd.sqrt(mpq(50)), 7) > 0  # 7.07 > 7
    assert cmp(Surd.sqrt(mpq(49, 1)), 7) == 0


def test_format_exact():
    assert format_exact(mpq(1, 2)) == "1/2"
    assert "√7" in format_exact(Surd.sqrt(mpq(7)))


@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(2, 60), st.integers(-50, 50), st.integers(2, 60))
def test_sign_matches_float_when_not_close(p, b, s, c, t):
    x = Surd.make(mpq(p), mpq(b), mpq(s))
    y = Surd.make(mpq(0), mpq(c), mpq(t))
    fx, fy = float(x), float(y)
    if abs(fx - fy) > 1e-9:
        assert cmp(x, y) == (1 if fx > fy else -1)
    assert sign(x) == (0 if x == 0 else (1 if float(x) > 0 else -1)) or abs(float(x)) < 1e-12
