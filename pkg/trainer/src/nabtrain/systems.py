"""Vector fields the trainer can generate labels and trajectories from.

The verifier keeps its own symbolic descriptions of these systems; here we
only ever need fast batched evaluation, so each one is a plain numpy
function mapping an (k, n) array of states to a (k, m) array of outputs.
Custom systems come in through the same JSON description files the verifier
reads, parsed with sympy and compiled to numpy.
"""

from __future__ import annotations

import json
import os
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass
class System:
    """A named vector field over a box domain."""

    name: str
    lo: np.ndarray
    hi: np.ndarray
    evaluate: Callable[[np.ndarray], np.ndarray]
    m: int
    time_kind: str = CONTINUOUS
    epsilon: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("domain bounds must be matching 1-d arrays")
        if np.any(self.hi < self.lo):
            raise ValueError("domain upper bounds below lower bounds")

    @property
    def n(self) -> int:
        return self.lo.size

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return self.lo + rng.random((k, self.n)) * (self.hi - self.lo)


def _water_tank(x):
    return (1.5 - np.sqrt(x[:, 0]))[:, None]


def _jet_engine(x):
    a, b = x[:, 0], x[:, 1]
    return np.stack([-b - 1.5 * a**2 - 0.5 * a**3 - 0.1, 3.0 * a - b], axis=1)


def _steam_governor(x):
    a, b, c = x[:, 0], x[:, 1], x[:, 2]
    return np.stack(
        [b, 0.5 * c**2 * np.sin(2.0 * a) - np.sin(a) - 3.0 * b,
         -(np.cos(a) - 1.0)],
        axis=1,
    )


def _exponential(x):
    a, b = x[:, 0], x[:, 1]
    return np.stack([-np.sin(np.exp(b**3 + 1.0)) - b**2, -a], axis=1)


def _nl1(x):
    return np.stack([x[:, 1], np.sqrt(x[:, 0])], axis=1)


def _nl2(x):
    a, b = x[:, 0], x[:, 1]
    return np.stack([a**2 + b, np.cbrt(a**2) - a], axis=1)


def _van_der_pol(x):
    a, b = x[:, 0], x[:, 1]
    return np.stack([b, (1.0 - a**2) * b - a], axis=1)


def _sine_2d(x):
    return np.stack([np.sin(0.5 * x[:, 1]), -np.sin(x[:, 0])], axis=1)


def _nonlinear_oscillator(x):
    a = x[:, 0]
    return (-a - 0.5 * a**3 + 0.3 * np.sin(a))[:, None]


def _spacecraft(x):
    r, v, w, u, e, th, ph = (x[:, i] for i in range(7))
    return np.stack(
        [
            w,
            u / r,
            -1.0 / r**2 + u**2 / r + th * np.cos(ph) / (1.0 + e),
            -w * u / r + th * np.sin(ph) / (1.0 + e),
            -th / 2.0,
        ],
        axis=1,
    )


def _lorenz(x):
    a, b, c = x[:, 0], x[:, 1], x[:, 2]
    return np.stack(
        [10.0 * (b - a), a * (28.0 - c) - b, a * b - (8.0 / 3.0) * c], axis=1
    )


# One-step map of x' = mu x, y' = lambda (y - x^2) sampled at dt = 0.02 with
# mu = -0.05, lambda = -1.  The coefficients are exp(mu dt), exp(lambda dt),
# and the exact cross term lambda (exp(2 mu dt) - exp(lambda dt))/(lambda - 2 mu).
QUADRATIC_MU = -0.05
QUADRATIC_LAMBDA = -1.0
QUADRATIC_DT = 0.02
_QA = math.exp(QUADRATIC_MU * QUADRATIC_DT)
_QB = math.exp(QUADRATIC_LAMBDA * QUADRATIC_DT)
_QC = (
    QUADRATIC_LAMBDA
    * (math.exp(2 * QUADRATIC_MU * QUADRATIC_DT) - _QB)
    / (QUADRATIC_LAMBDA - 2 * QUADRATIC_MU)
)


def _quadratic(x):
    a, b = x[:, 0], x[:, 1]
    return np.stack([_QA * a, _QB * b + _QC * a**2], axis=1)


_PI = math.pi
_BUILTINS = {
    "water_tank": ([0.1], [10.0], _water_tank, 1, CONTINUOUS, 0.097),
    "jet_engine": ([-1, -1], [1, 1], _jet_engine, 2, CONTINUOUS, 0.039),
    "steam_governor": (
        [-1, -1, -1], [1, 1, 1], _steam_governor, 3, CONTINUOUS, 0.105),
    "exponential": ([-1, -1], [1, 1], _exponential, 2, CONTINUOUS, 0.112),
    "nl1": ([0, -1], [1, 1], _nl1, 2, CONTINUOUS, 0.11),
    "nl2": ([-1, -1], [1, 1], _nl2, 2, CONTINUOUS, 0.081),
    "van_der_pol": ([-3, -3], [3, 3], _van_der_pol, 2, CONTINUOUS, 0.25),
    "sine_2d": ([-_PI, -_PI], [_PI, _PI], _sine_2d, 2, CONTINUOUS, 0.02),
    "nonlinear_oscillator": (
        [-3], [3], _nonlinear_oscillator, 1, CONTINUOUS, 0.165),
    "spacecraft": (
        [0.9, -_PI, -0.2, 0.8, -0.2, 0.0, -_PI],
        [1.1, _PI, 0.2, 1.2, 0.0, 0.1, _PI],
        _spacecraft, 5, CONTINUOUS, 0.12),
    "lorenz": ([-30, -30, 0], [30, 30, 60], _lorenz, 3, CONTINUOUS, 0.6),
    "quadratic": ([-0.5, -0.5], [0.5, 0.5], _quadratic, 2, DISCRETE, 0.1),
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def builtin_system(name: str) -> System:
    try:
        lo, hi, fn, m, kind, eps = _BUILTINS[name]
    except KeyError:
        raise KeyError(
            f"unknown system {name!r}; known: {', '.join(builtin_names())}"
        ) from None
    return System(name, np.asarray(lo, float), np.asarray(hi, float),
                  fn, m, kind, eps)


_PARSE_TRANSFORMS = standard_transformations + (convert_xor,)
# cbrt stays an opaque function through parsing; sympy.cbrt would rewrite it
# to a 1/3 power, which numpy evaluates as NaN for negative bases instead of
# the real cube root.
_CBRT = sympy.Function("cbrt")
_FUNCS = {
    "sqrt": sympy.sqrt, "cbrt": _CBRT, "sin": sympy.sin,
    "cos": sympy.cos, "tan": sympy.tan, "exp": sympy.exp, "log": sympy.log,
    "abs": sympy.Abs,
}
_NUMPY_OVERRIDES = [{"cbrt": np.cbrt}, "numpy"]


def load_system_config(path: str) -> System:
    """Build a System from the verifier's JSON system description format."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    state = list(doc["state"])
    syms = [sympy.Symbol(s) for s in state]
    local = dict(_FUNCS)
    local.update(zip(state, syms))
    exprs = [
        parse_expr(src, local_dict=local, transformations=_PARSE_TRANSFORMS,
                   evaluate=True)
        for src in doc["outputs"]
    ]
    # cbrt must stay the real cube root; a fractional power would go NaN
    # for negative bases under numpy.
    fns = [sympy.lambdify(syms, e, modules=_NUMPY_OVERRIDES) for e in exprs]

    def evaluate(x: np.ndarray) -> np.ndarray:
        cols = [np.broadcast_to(f(*(x[:, i] for i in range(len(state)))),
                                x.shape[:1]).astype(np.float64)
                for f in fns]
        return np.stack(cols, axis=1)

    lo = [float(p[0]) for p in doc["domain"]]
    hi = [float(p[1]) for p in doc["domain"]]
    eps = doc.get("epsilon")
    return System(doc["name"], np.asarray(lo), np.asarray(hi), evaluate,
                  len(exprs), doc.get("time", CONTINUOUS),
                  None if eps is None else float(eps))


def resolve_system(name_or_path: str) -> System:
    """Accept a builtin name or a path to a JSON description."""
    if name_or_path in _BUILTINS:
        return builtin_system(name_or_path)
    if os.path.exists(name_or_path):
        return load_system_config(name_or_path)
    # neither a catalog name nor a file; report it as a bad name
    return builtin_system(name_or_path)


def domain_only(name: str, lo, hi, m: int) -> System:
    """A System that is just a box; labels must come from elsewhere.

    Used for distillation, where the teacher network is the only label
    source and no vector field exists.
    """

    def evaluate(x: np.ndarray) -> np.ndarray:
        raise RuntimeError(f"{name} has no vector field; labels are external")

    return System(name, np.asarray(lo, float), np.asarray(hi, float),
                  evaluate, m)
