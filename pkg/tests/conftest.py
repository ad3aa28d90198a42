import pytest
from hypothesis import strategies as st

from maxlab.exact import mpq
from maxlab.fnspace import corpus, make_piecewise_linear, tent


@pytest.fixture(scope="session")
def T():
    return tent(0, 1, 1)


@pytest.fixture(scope="session")
def full_corpus():
    return corpus()


@st.composite
def pl_functions(draw, max_points=8, denominator=4):
    """Small nonnegative piecewise-linear functions on a quarter grid."""
    n = draw(st.integers(min_value=2, max_value=max_points))
    ticks = draw(st.lists(st.integers(-24, 24), min_size=n, max_size=n, unique=True))
    ticks.sort()
    bps = [mpq(t, denominator) for t in ticks]
    inner = draw(st.lists(st.integers(0, 12), min_size=n - 2, max_size=n - 2))
    vals = [mpq(0)] + [mpq(v, denominator) for v in inner] + [mpq(0)]
    return make_piecewise_linear(bps, vals)


rationals = st.builds(lambda p, q: mpq(p, q), st.integers(-1200, 1200), st.integers(1, 97))
