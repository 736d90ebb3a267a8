"""Symbolic expression trees for vector field components.

Nodes form a small closed language: constants, input variables, affine
combinations, products, quotients, rational powers, and the elementary
functions sqrt, cbrt, sin, cos, exp.  Every node supports

* batched numeric evaluation over arrays of points,
* exact symbolic partial derivatives (producing new trees),
* interval evaluation (sound outward range bounds over a box),
* structural queries used by the splitting heuristics.

Exponents of ``Pow`` are exact rationals (``fractions.Fraction``).  A power
``x^(k/q)`` in lowest terms with odd q is interpreted as the real root
``sign(x)^k * |x|^(k/q)``, defined for negative bases; even q requires a
nonnegative base.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import DomainEvalError, ParseError

_TWO_PI = 2.0 * math.pi


def real_cbrt(v: float) -> float:
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


# ---------------------------------------------------------------------------
# interval helpers
# ---------------------------------------------------------------------------

def _check_interval(lo: float, hi: float, what: str) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainEvalError(f"non-finite interval produced by {what}: [{lo}, {hi}]")
    return (lo, hi)


def interval_add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def interval_neg(a):
    return (-a[1], -a[0])


def interval_mul(a, b):
    p = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return (min(p), max(p))


def interval_div(a, b):
    if b[0] <= 0.0 <= b[1]:
        raise DomainEvalError("division by an interval containing zero")
    return _check_interval(*interval_mul(a, (1.0 / b[1], 1.0 / b[0])), what="div")


def interval_exp(a):
    try:
        return _check_interval(math.exp(a[0]), math.exp(a[1]), "exp")
    except OverflowError:
        raise DomainEvalError(f"overflow in exp over [{a[0]}, {a[1]}]") from None


def interval_sqrt(a):
    if a[0] < 0.0:
        raise DomainEvalError(f"sqrt of interval with negative lower bound {a[0]}")
    return (math.sqrt(a[0]), math.sqrt(a[1]))


def interval_cbrt(a):
    return (real_cbrt(a[0]), real_cbrt(a[1]))


def _angle_in(lo: float, hi: float, theta: float) -> bool:
    """Does theta + 2*pi*k fall inside [lo, hi] for some integer k?"""
    k = math.ceil((lo - theta) / _TWO_PI)
    return theta + _TWO_PI * k <= hi


def interval_sin(a):
    lo, hi = a
    if hi - lo >= _TWO_PI:
        return (-1.0, 1.0)
    s_lo, s_hi = math.sin(lo), math.sin(hi)
    out_lo = -1.0 if _angle_in(lo, hi, -math.pi / 2.0) else min(s_lo, s_hi)
    out_hi = 1.0 if _angle_in(lo, hi, math.pi / 2.0) else max(s_lo, s_hi)
    return (out_lo, out_hi)


def interval_cos(a):
    return interval_sin((a[0] + math.pi / 2.0, a[1] + math.pi / 2.0))


def _pow_scalar(x: float, p: Fraction) -> float:
    if p.denominator == 1:
        k = p.numerator
        if k < 0 and x == 0.0:
            raise DomainEvalError("zero raised to a negative power")
        return float(x) ** k
    if p.denominator % 2 == 0:
        if x < 0.0:
            raise DomainEvalError(f"negative base {x} for exponent {p} with even root")
        if x == 0.0 and p < 0:
            raise DomainEvalError("zero raised to a negative power")
        return float(x) ** float(p)
    # odd root: real-valued for negative bases
    if x == 0.0:
        if p < 0:
            raise DomainEvalError("zero raised to a negative power")
        return 0.0
    mag = abs(float(x)) ** float(p)
    return -mag if (x < 0.0 and p.numerator % 2 != 0) else mag


def interval_pow(a, p: Fraction):
    lo, hi = a
    if p == 0:
        return (1.0, 1.0)
    if p == 1:
        return a
    if p < 0 and lo <= 0.0 <= hi:
        raise DomainEvalError("negative power of an interval containing zero")
    if p.denominator % 2 == 0 and lo < 0.0:
        raise DomainEvalError(f"even-root power {p} of interval reaching below zero")
    if not (lo < 0.0 < hi):
        va, vb = _pow_scalar(lo, p), _pow_scalar(hi, p)
        return _check_interval(min(va, vb), max(va, vb), f"pow {p}")
    # interval straddles zero: exponent is positive with an odd root here
    if p.numerator % 2 == 0:
        # even-like power, x -> |x|^p
        return (0.0, max(_pow_scalar(lo, p), _pow_scalar(hi, p)))
    return (_pow_scalar(lo, p), _pow_scalar(hi, p))


# ---------------------------------------------------------------------------
# node classes
# ---------------------------------------------------------------------------

class ExprNode:
    """Base class; concrete nodes are frozen dataclasses below."""

    __slots__ = ()

    # construction sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return pow_(self, exponent)

    # queries -------------------------------------------------------------
    def variables(self) -> frozenset:
        raise NotImplementedError

    def is_constant(self) -> bool:
        return not self.variables()

    def nonlinear_variables(self) -> frozenset:
        """Indices of inputs the expression depends on non-affinely."""
        raise NotImplementedError

    # numerics ------------------------------------------------------------
    def evaluate(self, x) -> np.ndarray:
        """Evaluate at points of shape (..., n); returns shape (...,)."""
        x = np.asarray(x, dtype=np.float64)
        out = np.asarray(self._ev(x), dtype=np.float64)
        if out.shape != x.shape[:-1]:
            out = np.broadcast_to(out, x.shape[:-1]).copy()
        if not np.all(np.isfinite(out)):
            raise DomainEvalError(f"non-finite value evaluating {self}")
        return out

    def _ev(self, x):
        raise NotImplementedError

    def diff(self, i: int) -> "ExprNode":
        raise NotImplementedError

    def interval(self, lo, hi) -> tuple:
        """Sound range bounds over the box [lo, hi] (componentwise vectors)."""
        raise NotImplementedError

    def __str__(self) -> str:
        return self._fmt(_DEFAULT_NAMES)

    def _fmt(self, names) -> str:
        raise NotImplementedError


class _VarNames:
    def __getitem__(self, i):
        return f"x{i}"


_DEFAULT_NAMES = _VarNames()


@dataclass(frozen=True, slots=True)
class Constant(ExprNode):
    value: float

    def variables(self):
        return frozenset()

    def nonlinear_variables(self):
        return frozenset()

    def _ev(self, x):
        return self.value

    def diff(self, i):
        return Constant(0.0)

    def interval(self, lo, hi):
        return (self.value, self.value)

    def _fmt(self, names):
        return repr(self.value) if self.value >= 0 else f"({self.value!r})"


@dataclass(frozen=True, slots=True)
class Variable(ExprNode):
    index: int

    def variables(self):
        return frozenset((self.index,))

    def nonlinear_variables(self):
        return frozenset()

    def _ev(self, x):
        return x[..., self.index]

    def diff(self, i):
        return Constant(1.0 if i == self.index else 0.0)

    def interval(self, lo, hi):
        return (float(lo[self.index]), float(hi[self.index]))

    def _fmt(self, names):
        return names[self.index]


@dataclass(frozen=True, slots=True)
class Add(ExprNode):
    a: ExprNode
    b: ExprNode

    def variables(self):
        return self.a.variables() | self.b.variables()

    def nonlinear_variables(self):
        return self.a.nonlinear_variables() | self.b.nonlinear_variables()

    def _ev(self, x):
        return self.a._ev(x) + self.b._ev(x)

    def diff(self, i):
        return add(self.a.diff(i), self.b.diff(i))

    def interval(self, lo, hi):
        return interval_add(self.a.interval(lo, hi), self.b.interval(lo, hi))

    def _fmt(self, names):
        return f"({self.a._fmt(names)} + {self.b._fmt(names)})"


@dataclass(frozen=True, slots=True)
class Mul(ExprNode):
    a: ExprNode
    b: ExprNode

    def variables(self):
        return self.a.variables() | self.b.variables()

    def nonlinear_variables(self):
        if self.a.is_constant():
            return self.b.nonlinear_variables()
        if self.b.is_constant():
            return self.a.nonlinear_variables()
        return self.a.variables() | self.b.variables()

    def _ev(self, x):
        return self.a._ev(x) * self.b._ev(x)

    def diff(self, i):
        return add(mul(self.a.diff(i), self.b), mul(self.a, self.b.diff(i)))

    def interval(self, lo, hi):
        return interval_mul(self.a.interval(lo, hi), self.b.interval(lo, hi))

    def _fmt(self, names):
        return f"{self.a._fmt(names)} * {self.b._fmt(names)}"


@dataclass(frozen=True, slots=True)
class Div(ExprNode):
    a: ExprNode
    b: ExprNode

    def variables(self):
        return self.a.variables() | self.b.variables()

    def nonlinear_variables(self):
        if self.b.is_constant():
            return self.a.nonlinear_variables()
        return self.a.variables() | self.b.variables()

    def _ev(self, x):
        d = np.asarray(self.b._ev(x))
        if np.any(d == 0.0):
            raise DomainEvalError(f"division by zero evaluating {self}")
        return self.a._ev(x) / d

    def diff(self, i):
        num = add(mul(self.a.diff(i), self.b), neg(mul(self.a, self.b.diff(i))))
        return div(num, mul(self.b, self.b))

    def interval(self, lo, hi):
        return interval_div(self.a.interval(lo, hi), self.b.interval(lo, hi))

    def _fmt(self, names):
        return f"{self.a._fmt(names)} / ({self.b._fmt(names)})"


@dataclass(frozen=True, slots=True)
class Neg(ExprNode):
    a: ExprNode

    def variables(self):
        return self.a.variables()

    def nonlinear_variables(self):
        return self.a.nonlinear_variables()

    def _ev(self, x):
        return -self.a._ev(x)

    def diff(self, i):
        return neg(self.a.diff(i))

    def interval(self, lo, hi):
        return interval_neg(self.a.interval(lo, hi))

    def _fmt(self, names):
        return f"-({self.a._fmt(names)})"


@dataclass(frozen=True, slots=True)
class Pow(ExprNode):
    base: ExprNode
    exponent: Fraction

    def variables(self):
        return self.base.variables()

    def nonlinear_variables(self):
        if self.exponent == 1:
            return self.base.nonlinear_variables()
        if self.exponent == 0 or self.base.is_constant():
            return frozenset()
        return self.base.variables()

    def _ev(self, x):
        b = np.asarray(self.base._ev(x), dtype=np.float64)
        p = self.exponent
        if p.denominator == 1:
            k = p.numerator
            if k < 0 and np.any(b == 0.0):
                raise DomainEvalError(f"zero base with negative exponent in {self}")
            return b ** k
        if p < 0 and np.any(b == 0.0):
            raise DomainEvalError(f"zero base with negative exponent in {self}")
        if p.denominator % 2 == 0:
            if np.any(b < 0.0):
                raise DomainEvalError(f"negative base under even root in {self}")
            return b ** float(p)
        mag = np.abs(b) ** float(p)
        if p.numerator % 2 != 0:
            return np.sign(b) * mag
        return mag

    def diff(self, i):
        p = self.exponent
        if p == 0:
            return Constant(0.0)
        inner = self.base.diff(i)
        outer = mul(Constant(float(p)), pow_(self.base, p - 1))
        return mul(outer, inner)

    def interval(self, lo, hi):
        return interval_pow(self.base.interval(lo, hi), self.exponent)

    def _fmt(self, names):
        p = self.exponent
        ps = str(p.numerator) if p.denominator == 1 else f"({p.numerator}/{p.denominator})"
        return f"({self.base._fmt(names)})^{ps}"


class _Unary(ExprNode):
    __slots__ = ()
    _NAME = "?"

    def variables(self):
        return self.a.variables()

    def nonlinear_variables(self):
        if self.a.is_constant():
            return frozenset()
        return self.a.variables()

    def _fmt(self, names):
        return f"{self._NAME}({self.a._fmt(names)})"


@dataclass(frozen=True, slots=True)
class Sqrt(_Unary):
    a: ExprNode

    _NAME = "sqrt"

    def _ev(self, x):
        v = np.asarray(self.a._ev(x), dtype=np.float64)
        if np.any(v < 0.0):
            raise DomainEvalError(f"sqrt of negative value in {self}")
        return np.sqrt(v)

    def diff(self, i):
        # u' / (2 sqrt(u)); the result is undefined where u = 0
        return mul(mul(Constant(0.5), pow_(self.a, Fraction(-1, 2))), self.a.diff(i))

    def interval(self, lo, hi):
        return interval_sqrt(self.a.interval(lo, hi))


@dataclass(frozen=True, slots=True)
class Cbrt(_Unary):
    a: ExprNode

    _NAME = "cbrt"

    def _ev(self, x):
        return np.cbrt(np.asarray(self.a._ev(x), dtype=np.float64))

    def diff(self, i):
        return mul(
            mul(Constant(1.0 / 3.0), pow_(self.a, Fraction(-2, 3))), self.a.diff(i)
        )

    def interval(self, lo, hi):
        return interval_cbrt(self.a.interval(lo, hi))


@dataclass(frozen=True, slots=True)
class Sin(_Unary):
    a: ExprNode

    _NAME = "sin"

    def _ev(self, x):
        return np.sin(self.a._ev(x))

    def diff(self, i):
        return mul(Cos(self.a), self.a.diff(i))

    def interval(self, lo, hi):
        return interval_sin(self.a.interval(lo, hi))


@dataclass(frozen=True, slots=True)
class Cos(_Unary):
    a: ExprNode

    _NAME = "cos"

    def _ev(self, x):
        return np.cos(self.a._ev(x))

    def diff(self, i):
        return neg(mul(Sin(self.a), self.a.diff(i)))

    def interval(self, lo, hi):
        return interval_cos(self.a.interval(lo, hi))


@dataclass(frozen=True, slots=True)
class Exp(_Unary):
    a: ExprNode

    _NAME = "exp"

    def _ev(self, x):
        v = np.exp(self.a._ev(x))
        if not np.all(np.isfinite(v)):
            raise DomainEvalError(f"overflow in {self}")
        return v

    def diff(self, i):
        return mul(Exp(self.a), self.a.diff(i))

    def interval(self, lo, hi):
        return interval_exp(self.a.interval(lo, hi))


# ---------------------------------------------------------------------------
# smart constructors (light constant folding, keeps derivative trees small)
# ---------------------------------------------------------------------------

def as_expr(v) -> ExprNode:
    if isinstance(v, ExprNode):
        return v
    if isinstance(v, (int, float)):
        return Constant(float(v))
    raise TypeError(f"cannot interpret {v!r} as an expression")


def _const_val(e: ExprNode):
    return e.value if isinstance(e, Constant) else None


def add(a: ExprNode, b: ExprNode) -> ExprNode:
    va, vb = _const_val(a), _const_val(b)
    if va is not None and vb is not None:
        return Constant(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    return Add(a, b)


def neg(a: ExprNode) -> ExprNode:
    if isinstance(a, Constant):
        return Constant(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def mul(a: ExprNode, b: ExprNode) -> ExprNode:
    va, vb = _const_val(a), _const_val(b)
    if va is not None and vb is not None:
        return Constant(va * vb)
    if va == 0.0 or vb == 0.0:
        return Constant(0.0)
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    return Mul(a, b)


def div(a: ExprNode, b: ExprNode) -> ExprNode:
    va, vb = _const_val(a), _const_val(b)
    if vb == 0.0:
        raise DomainEvalError("division by the constant zero")
    if va is not None and vb is not None:
        return Constant(va / vb)
    if vb == 1.0:
        return a
    if va == 0.0:
        return Constant(0.0)
    return Div(a, b)


def pow_(base: ExprNode, exponent) -> ExprNode:
    if isinstance(exponent, float):
        if not exponent.is_integer():
            raise TypeError("power exponents must be integers or Fractions")
        exponent = int(exponent)
    p = Fraction(exponent)
    if p == 0:
        return Constant(1.0)
    if p == 1:
        return base
    v = _const_val(base)
    if v is not None:
        return Constant(_pow_scalar(v, p))
    return Pow(base, p)


def sqrt(a) -> ExprNode:
    a = as_expr(a)
    v = _const_val(a)
    if v is not None:
        if v < 0:
            raise DomainEvalError("sqrt of a negative constant")
        return Constant(math.sqrt(v))
    return Sqrt(a)


def cbrt(a) -> ExprNode:
    a = as_expr(a)
    v = _const_val(a)
    if v is not None:
        return Constant(real_cbrt(v))
    return Cbrt(a)


def sin(a) -> ExprNode:
    a = as_expr(a)
    v = _const_val(a)
    return Constant(math.sin(v)) if v is not None else Sin(a)


def cos(a) -> ExprNode:
    a = as_expr(a)
    v = _const_val(a)
    return Constant(math.cos(v)) if v is not None else Cos(a)


def exp(a) -> ExprNode:
    a = as_expr(a)
    v = _const_val(a)
    return Constant(math.exp(v)) if v is not None else Exp(a)


def var(i: int) -> ExprNode:
    return Variable(i)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_FUNCTIONS = {"sqrt": sqrt, "cbrt": cbrt, "sin": sin, "cos": cos, "exp": exp}


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r} at position {pos}")
        if m.lastgroup == "num":
            out.append(("num", m.group("num")))
        elif m.lastgroup == "ident":
            out.append(("ident", m.group("ident")))
        else:
            out.append(("op", m.group("op")))
        pos = m.end()
    out.append(("end", ""))
    return out


class _Parser:
    """Recursive-descent parser for the infix grammar.

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | power
    power := atom ('^' rational)?
    atom  := NUMBER | 'pi' | FUNC '(' expr ')' | VAR | '(' expr ')'

    Exponents are integers or parenthesized rationals like (2/3) or (-1/2).
    """

    def __init__(self, tokens, var_index):
        self.toks = tokens
        self.i = 0
        self.vars = var_index

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val!r}")

    def parse(self) -> ExprNode:
        e = self.expr()
        kind, val = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing token {val!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            _, op = self.take()
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def term(self):
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            _, op = self.take()
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self):
        e = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            e = pow_(e, self.rational())
        return e

    def rational(self) -> Fraction:
        # A bare exponent is a (possibly signed) integer; fractional
        # exponents must be parenthesized so that x^2/3 keeps meaning
        # (x^2)/3 under ordinary precedence.
        if self.peek() == ("op", "("):
            self.take()
            frac = self.rational_body(allow_fraction=True)
            self.expect_op(")")
            return frac
        return self.rational_body(allow_fraction=False)

    def rational_body(self, allow_fraction: bool) -> Fraction:
        sign = 1
        if self.peek() == ("op", "-"):
            self.take()
            sign = -1
        kind, val = self.take()
        if kind != "num" or not val.isdigit():
            raise ParseError(f"expected an integer in exponent, found {val!r}")
        num = sign * int(val)
        den = 1
        if allow_fraction and self.peek() == ("op", "/"):
            self.take()
            kind, val = self.take()
            if kind != "num" or not val.isdigit():
                raise ParseError(f"expected a denominator, found {val!r}")
            den = int(val)
        return Fraction(num, den)

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Constant(float(val))
        if kind == "ident":
            if val == "pi":
                return Constant(math.pi)
            if val in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return _FUNCTIONS[val](arg)
            if val in self.vars:
                return Variable(self.vars[val])
            raise ParseError(f"unknown identifier {val!r}")
        if (kind, val) == ("op", "("):
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(f"unexpected token {val!r}")


def parse_expr(text: str, var_names) -> ExprNode:
    """Parse an infix expression over the named input variables.

    ``var_names`` is an ordered sequence; name k maps to input index k.
    """
    names = list(var_names)
    index = {name: k for k, name in enumerate(names)}
    if len(index) != len(names):
        raise ParseError("duplicate variable names")
    return _Parser(_tokenize(text), index).parse()
