"""Exact one-dimensional Hardy-Littlewood maximal functions of piecewise-linear data.

Values and optimal radii are computed in exact arithmetic (rationals and
quadratic surds); a float oracle and an experiment harness sit on top.
"""

__version__ = "0.1.0"

from .exact import Surd, format_exact, format_rational, parse_rational
from .fnspace import (
    ExclusionRegion,
    Partition,
    PiecewiseLinearFn,
    StepFn,
    ValidationError,
    derivative,
    evaluate,
    make_piecewise_linear,
    norm_l1,
    norm_sobolev,
    norm_sup,
    perturbation_sequence,
    simple_approximation,
    tent,
)
from .maxops import (
    AtLeast,
    Below,
    Operator,
    Unconstrained,
    WindowInside,
    average,
    best_radius,
    candidate_radii,
    decompose,
    m1,
    m2,
    maximal,
    maximal_local,
    maximal_uncentered,
)
from .deriv import luiro_derivative, m2_derivative_formula, profile
