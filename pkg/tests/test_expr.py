"""Expression trees: evaluation, differentiation, interval enclosure, parsing.

Derivatives are checked against central finite differences, intervals
against dense sampling. Both oracles are independent of the tree code.
"""

import math

import numpy as np
import pytest

from boxcert.dynamics.expr import (
    cbrt,
    cos,
    exp,
    parse_expr,
    real_cbrt,
    sin,
    sqrt,
    var,
)
from boxcert.errors import (
    DomainEvalError,
    NonDifferentiableError,
    ParseError,
)

X, Y = var(0), var(1)

NAMES = ["x", "y"]

CASES = [
    (2.0 * X + 1.0, lambda x, y: 2 * x + 1),
    (X * Y - Y, lambda x, y: x * y - y),
    (X ** 3 - 1.5 * X ** 2, lambda x, y: x**3 - 1.5 * x**2),
    (sin(X) * cos(Y), lambda x, y: math.sin(x) * math.cos(y)),
    (exp(0.5 * X), lambda x, y: math.exp(0.5 * x)),
    (X / (Y + 3.0), lambda x, y: x / (y + 3)),
    (sqrt(X + 2.0), lambda x, y: math.sqrt(x + 2)),
    (cbrt(X), lambda x, y: math.copysign(abs(x) ** (1 / 3), x)),
    (X ** (-2), lambda x, y: x ** (-2.0) if x != 0 else math.inf),
]


@pytest.mark.parametrize("tree,fn", CASES)
def test_pointwise_evaluation(tree, fn, rng):
    pts = rng.uniform(0.3, 1.4, size=(50, 2))
    got = tree.evaluate(pts)
    want = np.array([fn(x, y) for x, y in pts])
    np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("tree,fn", CASES)
@pytest.mark.parametrize("axis", [0, 1])
def test_derivative_matches_finite_differences(tree, fn, axis, rng):
    d = tree.diff(axis)
    h = 1e-6
    for _ in range(20):
        p = rng.uniform(0.4, 1.2, size=2)
        lo, hi = p.copy(), p.copy()
        lo[axis] -= h
        hi[axis] += h
        fd = (fn(*hi) - fn(*lo)) / (2 * h)
        got = float(d.evaluate(p[None, :])[0])
        assert got == pytest.approx(fd, rel=2e-5, abs=2e-5)


@pytest.mark.parametrize("tree,fn", CASES)
def test_interval_contains_sampled_range(tree, fn, rng):
    lo = np.array([0.25, 0.5])
    hi = np.array([1.5, 2.0])
    ilo, ihi = tree.interval(lo, hi)
    pts = rng.uniform(lo, hi, size=(4000, 2))
    vals = tree.evaluate(pts)
    assert ilo <= vals.min() + 1e-12
    assert vals.max() - 1e-12 <= ihi


def test_interval_sin_spans_extremum():
    # [1, 4] brackets pi/2, so the upper end must reach exactly 1
    ilo, ihi = sin(X).interval(np.array([1.0]), np.array([4.0]))
    assert ihi == 1.0
    assert ilo == pytest.approx(math.sin(4.0), abs=1e-15)


def test_interval_even_power_through_zero():
    ilo, ihi = (X ** 2).interval(np.array([-2.0]), np.array([1.0]))
    assert ilo == 0.0 and ihi == 4.0


def test_division_by_interval_containing_zero():
    with pytest.raises(DomainEvalError):
        (1.0 / X).interval(np.array([-1.0]), np.array([1.0]))


def test_sqrt_negative_domain():
    with pytest.raises(DomainEvalError):
        sqrt(X).interval(np.array([-0.5]), np.array([1.0]))


def test_cbrt_defined_on_negatives():
    assert real_cbrt(-8.0) == pytest.approx(-2.0, abs=1e-15)
    ilo, ihi = cbrt(X).interval(np.array([-8.0]), np.array([1.0]))
    assert ilo == pytest.approx(-2.0) and ihi == pytest.approx(1.0)


def test_cbrt_not_differentiable_at_zero():
    d = cbrt(X).diff(0)
    with pytest.raises((NonDifferentiableError, DomainEvalError)):
        d.evaluate(np.array([[0.0]]))


def test_variables_and_nonlinearity():
    tree = X * Y + 2.0 * Y
    assert tree.variables() == frozenset({0, 1})
    assert tree.nonlinear_variables() == frozenset({0, 1})
    affine = 3.0 * X - Y + 1.0
    assert affine.nonlinear_variables() == frozenset()
    assert (Y ** 2 + X).nonlinear_variables() == frozenset({1})


# --- parser -----------------------------------------------------------


def test_parse_precedence_and_eval(rng):
    tree = parse_expr("-x^2 + 3*y/2 - 1.5", NAMES)
    pts = rng.uniform(-2, 2, size=(30, 2))
    want = -pts[:, 0] ** 2 + 3 * pts[:, 1] / 2 - 1.5
    np.testing.assert_allclose(tree.evaluate(pts), want, rtol=1e-14)


def test_parse_functions_and_pi():
    tree = parse_expr("sin(pi*x) + sqrt(y)", NAMES)
    out = tree.evaluate(np.array([[0.5, 4.0]]))
    assert out[0] == pytest.approx(1.0 + 2.0, abs=1e-15)


def test_parse_rational_exponent():
    tree = parse_expr("x^(3/2)", ["x"])
    assert float(tree.evaluate(np.array([[4.0]]))[0]) == pytest.approx(8.0)


def test_parse_negative_exponent():
    tree = parse_expr("x^(-1/2)", ["x"])
    assert float(tree.evaluate(np.array([[4.0]]))[0]) == pytest.approx(0.5)


def test_parse_unary_minus_chain():
    tree = parse_expr("--x", ["x"])
    assert float(tree.evaluate(np.array([[3.0]]))[0]) == 3.0


@pytest.mark.parametrize(
    "bad",
    ["x +", "(x", "x^y", "2 @ 3", "foo(x)", "x0", ""],
)
def test_parse_rejects_garbage(bad):
    with pytest.raises(ParseError):
        parse_expr(bad, NAMES)


def test_parse_default_variable_names():
    tree = parse_expr("x0 + 2*x1", ["x0", "x1"])
    assert float(tree.evaluate(np.array([[1.0, 2.0]]))[0]) == 5.0


def test_str_round_trip(rng):
    tree = X ** 2 * sin(Y) - exp(X) / (Y + 2.0)
    again = parse_expr(str(tree), ["x0", "x1"])
    pts = rng.uniform(0.1, 1.0, size=(20, 2))
    np.testing.assert_allclose(again.evaluate(pts), tree.evaluate(pts), rtol=1e-14)
