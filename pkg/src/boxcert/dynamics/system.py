"""Vector fields and discrete maps defined by expression trees."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, NotTwiceDifferentiableError
from ..geometry import Hyperrectangle
from .expr import ExprNode, as_expr, parse_expr

CONTINUOUS = "continuous"
DISCRETE = "discrete"


class DynamicalSystem:
    """A function f : R^n -> R^m given componentwise by expression trees.

    ``time_kind`` records whether the map is the right-hand side of an ODE
    (``continuous``) or a one-step state update (``discrete``).  Nothing in
    the closeness check depends on this; it is carried for bookkeeping and
    for trajectory generation downstream.
    """

    def __init__(self, name, n, outputs, domain, default_epsilon=None,
                 time_kind=CONTINUOUS):
        self.name = str(name)
        self.n = int(n)
        default_names = [f"x{i}" for i in range(self.n)]
        self.outputs = tuple(
            parse_expr(e, default_names) if isinstance(e, str) else as_expr(e)
            for e in outputs
        )
        self.m = len(self.outputs)
        if self.m == 0:
            raise DimensionError("a system needs at least one output")
        if not isinstance(domain, Hyperrectangle):
            raise TypeError("domain must be a Hyperrectangle")
        if domain.n != self.n:
            raise DimensionError(
                f"domain dimension {domain.n} does not match n={self.n}"
            )
        for j, e in enumerate(self.outputs):
            bad = [i for i in e.variables() if i < 0 or i >= self.n]
            if bad:
                raise DimensionError(
                    f"output {j} references input index {bad[0]} outside 0..{self.n - 1}"
                )
        self.domain = domain
        self.default_epsilon = None if default_epsilon is None else float(default_epsilon)
        if time_kind not in (CONTINUOUS, DISCRETE):
            raise ValueError(f"unknown time_kind {time_kind!r}")
        self.time_kind = time_kind
        self._jac = None
        self._hess = {}
        self._deps = None

    # ------------------------------------------------------------------
    def evaluate(self, x) -> np.ndarray:
        """f at points of shape (..., n); returns shape (..., m)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n:
            raise DimensionError(f"points of shape {x.shape} vs n={self.n}")
        cols = [e.evaluate(x) for e in self.outputs]
        return np.stack(cols, axis=-1)

    # ------------------------------------------------------------------
    def jacobian_exprs(self):
        if self._jac is None:
            self._jac = tuple(
                tuple(e.diff(i) for i in range(self.n)) for e in self.outputs
            )
        return self._jac

    def jacobian(self, x) -> np.ndarray:
        """The m-by-n Jacobian matrix at a single point x."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"jacobian expects a single point of shape ({self.n},)")
        rows = self.jacobian_exprs()
        out = np.empty((self.m, self.n))
        for j in range(self.m):
            for i in range(self.n):
                out[j, i] = rows[j][i].evaluate(x)
        return out

    # ------------------------------------------------------------------
    def dependency_graph(self):
        """Per output, the frozenset of inputs it depends on non-affinely."""
        if self._deps is None:
            self._deps = tuple(e.nonlinear_variables() for e in self.outputs)
        return self._deps

    # ------------------------------------------------------------------
    def hessian_exprs(self, j: int):
        if j not in self._hess:
            e = self.outputs[j]
            grads = [e.diff(i) for i in range(self.n)]
            # symmetric: fill the upper triangle and mirror
            rows = [[None] * self.n for _ in range(self.n)]
            for a in range(self.n):
                for b in range(a, self.n):
                    d2 = grads[a].diff(b)
                    rows[a][b] = d2
                    rows[b][a] = d2
            self._hess[j] = tuple(tuple(r) for r in rows)
        return self._hess[j]

    def hessian_bound(self, j: int, box: Hyperrectangle) -> float:
        """An upper bound M on the spectral norm of the Hessian of output j,
        valid everywhere on the box.

        Each Hessian entry is bounded in magnitude by interval evaluation of
        the symbolic second derivative, and the spectral norm of the
        resulting nonnegative matrix E is bounded by sqrt(||E||_1 ||E||_inf).
        Raises NotTwiceDifferentiableError when some entry has no finite
        bound over the box (e.g. sqrt or cbrt curvature across zero).
        """
        if not 0 <= j < self.m:
            raise DimensionError(f"output index {j} outside 0..{self.m - 1}")
        if box.n != self.n:
            raise DimensionError("box dimension mismatch")
        lo, hi = box.lo, box.hi
        exprs = self.hessian_exprs(j)
        env = np.empty((self.n, self.n))
        for a in range(self.n):
            for b in range(a, self.n):
                try:
                    ival = exprs[a][b].interval(lo, hi)
                except Exception as exc:
                    raise NotTwiceDifferentiableError(
                        f"{self.name}: no finite curvature bound for output {j} "
                        f"entry ({a},{b}) over {box}: {exc}"
                    ) from exc
                env[a, b] = env[b, a] = max(abs(ival[0]), abs(ival[1]))
        if not np.all(np.isfinite(env)):
            raise NotTwiceDifferentiableError(
                f"{self.name}: infinite curvature bound for output {j}"
            )
        norm_1 = float(np.max(env.sum(axis=0))) if self.n else 0.0
        norm_inf = float(np.max(env.sum(axis=1))) if self.n else 0.0
        return math.sqrt(norm_1 * norm_inf)

    # ------------------------------------------------------------------
    def __repr__(self):
        return (
            f"DynamicalSystem({self.name!r}, n={self.n}, m={self.m}, "
            f"time_kind={self.time_kind!r})"
        )
