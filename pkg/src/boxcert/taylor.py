"""Certified first-order enclosures of vector fields over boxes.

Given f : R^n -> R^m and a box H with center c, the main entry point
:func:`taylor_expand` produces a pair of affine functions that sandwich f
everywhere on H:

    A x + b_low  <=  f(x)  <=  A x + b_up    for all x in H,

with A equal to the exact Jacobian of f at c.  The offsets come from sound
remainder intervals computed two ways and combined per output component:

* compositionally, by propagating scalar Taylor models through the
  expression tree (local curvature of each elementary function plus
  cross terms for products and quotients, with range clipping), and
* as a whole-expression Lagrange bound (1/2) M ||delta||_2^2 whenever a
  finite curvature bound M for the full output is available,

keeping whichever interval is narrower.  Remainders of convex or concave
pieces use exact endpoint gaps, so one-sided zeros (for example the lower
remainder of a convex function) are preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionError,
    DomainEvalError,
    EnclosureUnavailableError,
)
from .errors import NotTwiceDifferentiableError
from .geometry import Hyperrectangle
from .dynamics.expr import (
    Add,
    Cbrt,
    Constant,
    Cos,
    Div,
    Exp,
    ExprNode,
    Mul,
    Neg,
    Pow,
    Sin,
    Sqrt,
    Variable,
    _pow_scalar,
    interval_add,
    interval_cbrt,
    interval_cos,
    interval_exp,
    interval_mul,
    interval_neg,
    interval_pow,
    interval_sin,
    interval_sqrt,
    real_cbrt,
)
from .dynamics.system import DynamicalSystem

_INF = math.inf


# ---------------------------------------------------------------------------
# public result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertifiedEnclosure:
    """Sound affine sandwich of a function over a box.

    For every x in ``box`` and output j:

        (A_low x + b_low)_j  <=  f_j(x)  <=  (A_up x + b_up)_j

    Enclosures built from Taylor expansions have A_low identical to A_up;
    enclosures repackaged from network bound propagation generally do not.
    """

    box: Hyperrectangle
    A_low: np.ndarray
    A_up: np.ndarray
    b_low: np.ndarray
    b_up: np.ndarray

    def __post_init__(self):
        m, n = self.A_low.shape
        if self.A_up.shape != (m, n):
            raise DimensionError("A_low and A_up shapes differ")
        if self.b_low.shape != (m,) or self.b_up.shape != (m,):
            raise DimensionError("offset vectors must have one entry per output")
        if self.box.n != n:
            raise DimensionError("box dimension does not match A columns")

    @property
    def m(self) -> int:
        return self.A_low.shape[0]

    @property
    def n(self) -> int:
        return self.A_low.shape[1]

    def lower(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.A_low.T + self.b_low

    def upper(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.A_up.T + self.b_up

    def split_width(self) -> np.ndarray:
        """Per-output looseness used as the refinement trigger:
        (b_up - b_low) + |A_up - A_low| . radius."""
        return (self.b_up - self.b_low) + np.abs(self.A_up - self.A_low) @ self.box.radius

    def value_range(self) -> tuple:
        """Concrete (lo, hi) vectors of the sandwich over the box."""
        c, r = self.box.center, self.box.radius
        lo = self.A_low @ c - np.abs(self.A_low) @ r + self.b_low
        hi = self.A_up @ c + np.abs(self.A_up) @ r + self.b_up
        return lo, hi


@dataclass(frozen=True)
class ScalarRelaxation:
    """One-dimensional certified linearization of an elementary function:
    slope*y + intercept + r_min <= phi(y) <= slope*y + intercept + r_max
    for all y in the interval it was built over."""

    slope: float
    intercept: float
    r_min: float
    r_max: float


# ---------------------------------------------------------------------------
# scalar elementary relaxations
# ---------------------------------------------------------------------------

def _scale_interval(r, s: float):
    return (s * r[0], s * r[1]) if s >= 0.0 else (s * r[1], s * r[0])


def _intersect(a, b):
    lo = max(a[0], b[0])
    hi = min(a[1], b[1])
    if lo > hi:
        # Both operands are sound enclosures of the same nonempty set, so a
        # crossing can only come from rounding; collapse to the midpoint.
        mid = 0.5 * (lo + hi)
        return (mid, mid)
    return (lo, hi)


class _Elementary:
    """Value, derivative, curvature and range rules for one scalar function."""

    def __init__(self, value, deriv, curvature, rng):
        self.value = value
        self.deriv = deriv          # may raise DomainEvalError at a point
        self.curvature = curvature  # interval of phi'' over [a, b], or None
        self.range = rng            # sound range of phi over [a, b]


def _make_pow_elem(p: Fraction) -> _Elementary:
    c2 = float(p * (p - 1))

    def curvature(a, b):
        if c2 == 0.0:
            return (0.0, 0.0)
        try:
            base = interval_pow((a, b), p - 2)
        except DomainEvalError:
            return None
        return _scale_interval(base, c2)

    return _Elementary(
        value=lambda y: _pow_scalar(y, p),
        deriv=lambda y: float(p) * _pow_scalar(y, p - 1),
        curvature=curvature,
        rng=lambda a, b: interval_pow((a, b), p),
    )


def _cbrt_curvature(a, b):
    # cbrt is convex on the negatives and concave on the positives; across
    # zero there is a cusp in the second derivative and no single sign
    if a >= 0.0:
        return (-_INF, 0.0)
    if b <= 0.0:
        return (0.0, _INF)
    return None


def _elementary_table():
    return {
        "sqrt": _Elementary(
            value=math.sqrt,
            deriv=lambda y: 0.5 / math.sqrt(y) if y > 0.0 else _raise_dom("sqrt slope at 0"),
            curvature=lambda a, b: (-_INF, 0.0),
            rng=lambda a, b: interval_sqrt((a, b)),
        ),
        "cbrt": _Elementary(
            value=real_cbrt,
            deriv=lambda y: (1.0 / 3.0) * _pow_scalar(y, Fraction(-2, 3)) if y != 0.0
                else _raise_dom("cbrt slope at 0"),
            curvature=_cbrt_curvature,
            rng=lambda a, b: interval_cbrt((a, b)),
        ),
        "sin": _Elementary(
            value=math.sin,
            deriv=math.cos,
            curvature=lambda a, b: interval_neg(interval_sin((a, b))),
            rng=lambda a, b: interval_sin((a, b)),
        ),
        "cos": _Elementary(
            value=math.cos,
            deriv=lambda y: -math.sin(y),
            curvature=lambda a, b: interval_neg(interval_cos((a, b))),
            rng=lambda a, b: interval_cos((a, b)),
        ),
        "exp": _Elementary(
            value=math.exp,
            deriv=math.exp,
            curvature=lambda a, b: interval_exp((a, b)),
            rng=lambda a, b: interval_exp((a, b)),
        ),
    }


def _raise_dom(msg):
    raise DomainEvalError(msg)


_ELEM = _elementary_table()


def _relax_scalar(elem: _Elementary, a: float, b: float, y0: float):
    """Certified linearization of one elementary function over [a, b] around
    y0 in [a, b].  Returns (value, slope, r_lo, r_hi) such that

        phi(y) in value + slope*(y - y0) + [r_lo, r_hi]   for all y in [a, b].
    """
    if not (a <= y0 <= b):
        y0 = min(max(y0, a), b)
    v = elem.value(y0)
    tangent = True
    try:
        s = elem.deriv(y0)
        if not math.isfinite(s):
            s = None
    except (DomainEvalError, ZeroDivisionError, OverflowError):
        s = None
    if s is None:
        # no usable slope at the expansion point: fall back to a constant
        # band; the range clip below then encloses the function outright
        s = 0.0
        tangent = False

    if a == b:
        return v, s, 0.0, 0.0

    def gap(y):
        return elem.value(y) - (v + s * (y - y0))

    # range-based clip, sound for any curvature and any slope
    r_lo, r_hi = elem.range(a, b)
    lin_a = v + s * (a - y0)
    lin_b = v + s * (b - y0)
    lin_lo, lin_hi = min(lin_a, lin_b), max(lin_a, lin_b)
    local = (r_lo - lin_hi, r_hi - lin_lo)

    # curvature arguments need the line to be the tangent at y0
    curv = elem.curvature(a, b) if tangent else None
    if curv is not None:
        if curv[0] >= 0.0:
            # convex: tangent lies below the graph, worst gap at an endpoint
            local = _intersect(local, (0.0, max(gap(a), gap(b))))
        elif curv[1] <= 0.0:
            local = _intersect(local, (min(gap(a), gap(b)), 0.0))
        elif math.isfinite(curv[0]) and math.isfinite(curv[1]):
            m2 = max(abs(curv[0]), abs(curv[1]))
            h = max(b - y0, y0 - a)
            lag = 0.5 * m2 * h * h
            local = _intersect(local, (-lag, lag))

    if not (math.isfinite(local[0]) and math.isfinite(local[1])):
        raise EnclosureUnavailableError(
            f"no finite local remainder over [{a}, {b}]"
        )
    return v, s, local[0], local[1]


def expand_elementary(kind: str, interval, center: float,
                      exponent=None) -> ScalarRelaxation:
    """Certified linearization of an elementary scalar function.

    ``kind`` is one of sqrt, cbrt, sin, cos, exp, pow (pow requires the
    rational ``exponent``).  ``interval`` is the (lo, hi) input range the
    relaxation must hold on and ``center`` the expansion point inside it.
    """
    a, b = float(interval[0]), float(interval[1])
    if b < a:
        raise DimensionError(f"empty interval [{a}, {b}]")
    if kind == "pow":
        if exponent is None:
            raise DimensionError("pow relaxation needs an exponent")
        elem = _make_pow_elem(Fraction(exponent))
    else:
        try:
            elem = _ELEM[kind]
        except KeyError:
            raise DimensionError(f"unknown elementary kind {kind!r}") from None
    v, s, r_lo, r_hi = _relax_scalar(elem, a, b, float(center))
    return ScalarRelaxation(
        slope=s, intercept=v - s * float(center), r_min=r_lo, r_max=r_hi
    )


# ---------------------------------------------------------------------------
# Taylor-model propagation through expression trees
# ---------------------------------------------------------------------------

class _TM:
    """Scalar Taylor model over a fixed box: value and gradient at the box
    center plus a sound remainder interval."""

    __slots__ = ("v", "g", "r")

    def __init__(self, v, g, r):
        self.v = v
        self.g = g
        self.r = r

    def spread(self, radius) -> float:
        """Maximum magnitude of g . (x - c) over the box."""
        return float(np.abs(self.g) @ radius)

    def rng(self, radius):
        s = self.spread(radius)
        return (self.v - s + self.r[0], self.v + s + self.r[1])


def _ia_ranges(expr: ExprNode, lo, hi, memo: dict):
    """Bottom-up interval ranges for every node of the tree."""
    key = id(expr)
    if key in memo:
        return memo[key]
    if isinstance(expr, (Constant, Variable)):
        out = expr.interval(lo, hi)
    elif isinstance(expr, Add):
        out = interval_add(_ia_ranges(expr.a, lo, hi, memo),
                           _ia_ranges(expr.b, lo, hi, memo))
    elif isinstance(expr, Mul):
        out = interval_mul(_ia_ranges(expr.a, lo, hi, memo),
                           _ia_ranges(expr.b, lo, hi, memo))
    elif isinstance(expr, Div):
        a = _ia_ranges(expr.a, lo, hi, memo)
        b = _ia_ranges(expr.b, lo, hi, memo)
        if b[0] <= 0.0 <= b[1]:
            raise DomainEvalError("division by an interval containing zero")
        out = interval_mul(a, (1.0 / b[1], 1.0 / b[0]))
    elif isinstance(expr, Neg):
        out = interval_neg(_ia_ranges(expr.a, lo, hi, memo))
    elif isinstance(expr, Pow):
        out = interval_pow(_ia_ranges(expr.base, lo, hi, memo), expr.exponent)
    elif isinstance(expr, Sqrt):
        out = interval_sqrt(_ia_ranges(expr.a, lo, hi, memo))
    elif isinstance(expr, Cbrt):
        out = interval_cbrt(_ia_ranges(expr.a, lo, hi, memo))
    elif isinstance(expr, Sin):
        out = interval_sin(_ia_ranges(expr.a, lo, hi, memo))
    elif isinstance(expr, Cos):
        out = interval_cos(_ia_ranges(expr.a, lo, hi, memo))
    elif isinstance(expr, Exp):
        out = interval_exp(_ia_ranges(expr.a, lo, hi, memo))
    else:
        raise TypeError(f"unknown node type {type(expr).__name__}")
    memo[key] = out
    return out


def _compose_elementary(elem: _Elementary, inner: _TM, inner_iv, radius) -> _TM:
    # input range: interval arithmetic intersected with the inner model's
    # own range (both sound, the intersection is tighter)
    a, b = _intersect(inner_iv, inner.rng(radius))
    v, s, r_lo, r_hi = _relax_scalar(elem, a, b, inner.v)
    g = s * inner.g
    r = interval_add(_scale_interval(inner.r, s), (r_lo, r_hi))
    out = _TM(v, g, r)
    # clip the combined remainder against the function range over the box:
    # phi(inner(x)) - (v + g.(x-c)) is confined by range minus affine range
    spread = out.spread(radius)
    rng = elem.range(a, b)
    clip = (rng[0] - (v + spread), rng[1] - (v - spread))
    out.r = _intersect(out.r, clip)
    return out


def _tm(expr: ExprNode, center, radius, iv: dict) -> _TM:
    n = center.shape[0]
    if isinstance(expr, Constant):
        return _TM(expr.value, np.zeros(n), (0.0, 0.0))
    if isinstance(expr, Variable):
        g = np.zeros(n)
        g[expr.index] = 1.0
        return _TM(float(center[expr.index]), g, (0.0, 0.0))
    if isinstance(expr, Add):
        ta = _tm(expr.a, center, radius, iv)
        tb = _tm(expr.b, center, radius, iv)
        return _TM(ta.v + tb.v, ta.g + tb.g, interval_add(ta.r, tb.r))
    if isinstance(expr, Neg):
        t = _tm(expr.a, center, radius, iv)
        return _TM(-t.v, -t.g, interval_neg(t.r))
    if isinstance(expr, Mul):
        ta = _tm(expr.a, center, radius, iv)
        tb = _tm(expr.b, center, radius, iv)
        da = (-ta.spread(radius), ta.spread(radius))
        db = (-tb.spread(radius), tb.spread(radius))
        r = interval_add(
            interval_add(_scale_interval(tb.r, ta.v), _scale_interval(ta.r, tb.v)),
            interval_add(
                interval_mul(ta.r, tb.r),
                interval_add(
                    interval_mul(da, db),
                    interval_add(interval_mul(da, tb.r), interval_mul(db, ta.r)),
                ),
            ),
        )
        return _TM(ta.v * tb.v, ta.v * tb.g + tb.v * ta.g, r)
    if isinstance(expr, Div):
        ta = _tm(expr.a, center, radius, iv)
        tb = _tm(expr.b, center, radius, iv)
        recip = _compose_elementary(
            _make_pow_elem(Fraction(-1)), tb, iv[id(expr.b)], radius
        )
        da = (-ta.spread(radius), ta.spread(radius))
        db = (-recip.spread(radius), recip.spread(radius))
        r = interval_add(
            interval_add(_scale_interval(recip.r, ta.v), _scale_interval(ta.r, recip.v)),
            interval_add(
                interval_mul(ta.r, recip.r),
                interval_add(
                    interval_mul(da, db),
                    interval_add(interval_mul(da, recip.r), interval_mul(db, ta.r)),
                ),
            ),
        )
        return _TM(ta.v * recip.v, ta.v * recip.g + recip.v * ta.g, r)
    if isinstance(expr, Pow):
        inner = _tm(expr.base, center, radius, iv)
        return _compose_elementary(
            _make_pow_elem(expr.exponent), inner, iv[id(expr.base)], radius
        )
    if isinstance(expr, (Sqrt, Cbrt, Sin, Cos, Exp)):
        kind = {Sqrt: "sqrt", Cbrt: "cbrt", Sin: "sin", Cos: "cos", Exp: "exp"}[
            type(expr)
        ]
        inner = _tm(expr.a, center, radius, iv)
        return _compose_elementary(_ELEM[kind], inner, iv[id(expr.a)], radius)
    raise TypeError(f"unknown node type {type(expr).__name__}")


def taylor_expand(sys: DynamicalSystem, box: Hyperrectangle,
                  use_lagrange: bool = True, outputs=None) -> CertifiedEnclosure:
    """Certified first-order enclosure of a system over a box.

    ``outputs`` restricts the expansion to the given output indices, in
    order; the result's rows then follow that order.  Raises
    EnclosureUnavailableError when no sound finite enclosure exists for some
    requested output (this happens only outside the function's domain of
    definition or at genuinely singular expansion data).
    """
    if box.n != sys.n:
        raise DimensionError(f"box dim {box.n} vs system n={sys.n}")
    selected = range(sys.m) if outputs is None else list(outputs)
    c, r = box.center, box.radius
    lo, hi = box.lo, box.hi
    A = np.zeros((len(selected), sys.n))
    b_lo = np.zeros(len(selected))
    b_up = np.zeros(len(selected))
    delta_sq = float(r @ r)
    for row, j in enumerate(selected):
        e = sys.outputs[j]
        memo: dict = {}
        try:
            _ia_ranges(e, lo, hi, memo)
            tm = _tm(e, c, r, memo)
        except (DomainEvalError, EnclosureUnavailableError) as exc:
            raise EnclosureUnavailableError(
                f"{sys.name}: output {j} has no enclosure over {box}: {exc}"
            ) from exc
        rem = tm.r
        if use_lagrange and not box.is_degenerate():
            try:
                m_bound = sys.hessian_bound(j, box)
            except NotTwiceDifferentiableError:
                m_bound = None
            if m_bound is not None:
                lag = 0.5 * m_bound * delta_sq
                if 2.0 * lag < rem[1] - rem[0]:
                    rem = (-lag, lag)
        A[row] = tm.g
        base = tm.v - float(tm.g @ c)
        b_lo[row] = base + rem[0]
        b_up[row] = base + rem[1]
    return CertifiedEnclosure(box, A, A.copy(), b_lo, b_up)


def lipschitz_relaxation(f_center, lipschitz, box: Hyperrectangle) -> CertifiedEnclosure:
    """Constant-band enclosure from a Lipschitz modulus.

    ``f_center`` is f at the box center (length m) and ``lipschitz`` a scalar
    or per-output bound on the infinity-norm Lipschitz constant over the box.
    The enclosure is f(c) +- L * max_radius with zero linear part.
    """
    f_c = np.atleast_1d(np.asarray(f_center, dtype=np.float64))
    L = np.broadcast_to(np.asarray(lipschitz, dtype=np.float64), f_c.shape)
    if np.any(L < 0.0):
        raise ValueError("Lipschitz bounds must be nonnegative")
    m_delta = float(np.max(box.radius)) if box.n else 0.0
    band = L * m_delta
    zeros = np.zeros((f_c.shape[0], box.n))
    return CertifiedEnclosure(box, zeros, zeros.copy(), f_c - band, f_c + band)
