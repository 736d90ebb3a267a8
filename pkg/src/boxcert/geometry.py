"""Axis-aligned boxes (hyperrectangles) in R^n.

The stored identity of a box is its corner pair (lo, hi).  Center and radius
are derived views; keeping corners primary means split children share their
dividing face exactly, so a set of boxes produced by recursive splitting
tiles its parent with no gaps or interior overlaps at the float level.
Degenerate boxes (zero width on some or all axes) are allowed; they behave
as lower-dimensional slices or points.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError


def _freeze(a) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.setflags(write=False)
    return a


class Hyperrectangle:
    """Axis-aligned box { x : lo_i <= x_i <= hi_i for all i }."""

    __slots__ = ("lo", "hi", "center", "radius")

    def __init__(self, center, radius):
        center = np.asarray(center, dtype=np.float64)
        radius = np.asarray(radius, dtype=np.float64)
        if center.ndim != 1 or radius.ndim != 1:
            raise DimensionError("center and radius must be 1-D vectors")
        if center.shape != radius.shape:
            raise DimensionError(
                f"center has shape {center.shape} but radius has shape {radius.shape}"
            )
        if np.any(radius < 0):
            raise ValueError("radius components must be nonnegative")
        self._init_corners(center - radius, center + radius)

    def _init_corners(self, lo, hi):
        lo = _freeze(lo)
        hi = _freeze(hi)
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("box bounds must be finite")
        self.lo = lo
        self.hi = hi
        self.center = _freeze((lo + hi) * 0.5)
        self.radius = _freeze((hi - lo) * 0.5)

    @classmethod
    def from_bounds(cls, lo, hi) -> "Hyperrectangle":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if lo.ndim != 1 or hi.ndim != 1 or lo.shape != hi.shape:
            raise DimensionError("bounds must be 1-D vectors of equal length")
        if np.any(hi < lo):
            raise ValueError("upper bounds must not be below lower bounds")
        box = cls.__new__(cls)
        box._init_corners(lo, hi)
        return box

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def is_degenerate(self) -> bool:
        return bool(np.any(self.hi == self.lo))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.lo.shape:
            raise DimensionError(f"point of shape {x.shape} vs box of dim {self.n}")
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Draw k points uniformly from the box, shape (k, n)."""
        u = rng.random((k, self.n))
        return self.lo + u * (self.hi - self.lo)

    def split(self, axis: int) -> tuple["Hyperrectangle", "Hyperrectangle"]:
        """Halve the box along one axis.

        Returns the (lower, upper) halves.  Both children carry the same
        midpoint float on the cut face, so they tile the parent exactly.
        """
        if not 0 <= axis < self.n:
            raise DimensionError(f"axis {axis} out of range for dim {self.n}")
        if self.hi[axis] <= self.lo[axis]:
            raise ValueError(f"cannot split degenerate axis {axis}")
        mid = 0.5 * (self.lo[axis] + self.hi[axis])
        lo_hi = self.hi.copy()
        lo_hi[axis] = mid
        hi_lo = self.lo.copy()
        hi_lo[axis] = mid
        return (
            Hyperrectangle.from_bounds(self.lo, lo_hi),
            Hyperrectangle.from_bounds(hi_lo, self.hi),
        )

    def key(self) -> bytes:
        """Exact byte identity of the box (used for hashing and seeding)."""
        return self.lo.tobytes() + self.hi.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hyperrectangle):
            return NotImplemented
        return (
            self.lo.shape == other.lo.shape
            and bool(np.all(self.lo == other.lo))
            and bool(np.all(self.hi == other.hi))
        )

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        lo = ", ".join(repr(float(v)) for v in self.lo)
        hi = ", ".join(repr(float(v)) for v in self.hi)
        return f"Hyperrectangle(lo=[{lo}], hi=[{hi}])"


def total_volume(boxes) -> float:
    return math.fsum(b.volume() for b in boxes)
