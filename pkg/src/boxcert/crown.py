"""Backward linear bound propagation for ReLU-family networks.

Produces, for a network N over a box, affine lower and upper bounds

    A_low x + b_low  <=  N(x)  <=  A_up x + b_up    for all x in the box,

by walking the layers backward and replacing each activation with a sound
pair of lines valid on that neuron's pre-activation interval.  The bounds
are exact (A_low == A_up, zero gap) when every activation on the path is
identity or provably stable.

Pre-activation intervals come from a cheap forward interval sweep by
default.  The ``tight`` variant instead bounds each nonlinear layer with
its own backward pass through the prefix network, which costs more but is
dramatically tighter on deep or chained networks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .geometry import Hyperrectangle
from .network import IDENTITY, LEAKY_RELU, RELU, Network
from .taylor import CertifiedEnclosure

INTERVAL = "interval"
BACKWARD = "backward"


@dataclass
class NeuronBounds:
    """Pre-activation interval [lower[k], upper[k]] per layer.

    Entries may be None for layers whose activation needs no relaxation
    (identity) when bounds were computed by the backward method.
    """

    lower: list
    upper: list


@dataclass(frozen=True)
class AffineBounds:
    """Affine sandwich of a network over a box (see module docstring)."""

    box: Hyperrectangle
    A_low: np.ndarray
    A_up: np.ndarray
    b_low: np.ndarray
    b_up: np.ndarray


@dataclass(frozen=True)
class ActivationRelaxation:
    """Lines bounding one scalar activation on [l, u]:
    lower_slope*z + lower_intercept <= act(z) <= upper_slope*z + upper_intercept."""

    upper_slope: float
    upper_intercept: float
    lower_slope: float
    lower_intercept: float


def relax_activation(activation: str, l: float, u: float,
                     slope: float | None = None) -> ActivationRelaxation:
    """Sound linear relaxation of an activation on the interval [l, u].

    Unstable ReLU-family neurons get the chord as the upper line and a
    through-origin lower line whose slope is the identity side exactly when
    u exceeds |l| (ties keep the flat side).
    """
    if u < l:
        raise DimensionError(f"empty pre-activation interval [{l}, {u}]")
    us, ui, ls, li = _relax_arrays(
        activation, np.asarray([l], dtype=np.float64),
        np.asarray([u], dtype=np.float64), slope,
    )
    return ActivationRelaxation(float(us[0]), float(ui[0]), float(ls[0]), float(li[0]))


def _relax_arrays(activation, l, u, slope):
    """Vectorized activation relaxation; returns (up_s, up_i, lo_s, lo_i)."""
    w = l.shape[0]
    if activation == IDENTITY:
        ones, zeros = np.ones(w), np.zeros(w)
        return ones, zeros, ones.copy(), zeros.copy()
    if activation == RELU:
        lo_line = 0.0
    elif activation == LEAKY_RELU:
        lo_line = float(slope)
    else:
        raise DimensionError(f"unknown activation {activation!r}")

    up_s = np.empty(w)
    up_i = np.zeros(w)
    lo_s = np.empty(w)
    lo_i = np.zeros(w)

    on = l >= 0.0
    off = u <= 0.0
    unstable = ~(on | off)

    up_s[on] = 1.0
    lo_s[on] = 1.0
    up_s[off] = lo_line
    lo_s[off] = lo_line

    if np.any(unstable):
        lu, uu = l[unstable], u[unstable]
        # chord through (l, act(l)) and (u, u)
        chord = (uu - lo_line * lu) / (uu - lu)
        up_s[unstable] = chord
        up_i[unstable] = uu * (1.0 - chord)
        # lower line through the origin: identity side iff u > |l|
        lo_s[unstable] = np.where(uu > -lu, 1.0, lo_line)
    return up_s, up_i, lo_s, lo_i


# ---------------------------------------------------------------------------
# pre-activation bounds
# ---------------------------------------------------------------------------

def pre_activation_bounds(net: Network, box: Hyperrectangle,
                          method: str = INTERVAL) -> NeuronBounds:
    """Sound per-neuron pre-activation intervals for every layer.

    ``interval``: one forward interval sweep (fast, loose on deep nets).
    ``backward``: each nonlinear layer bounded by backward propagation
    through its prefix; identity layers are skipped (their bounds are
    never consumed by a relaxation) and left as None.
    """
    if box.n != net.n:
        raise DimensionError(f"box dim {box.n} vs network input {net.n}")
    if method == INTERVAL:
        return _interval_sweep(net, box)
    if method == BACKWARD:
        return _backward_sweep(net, box)
    raise DimensionError(f"unknown bounds method {method!r}")


def _interval_sweep(net, box):
    a_lo, a_hi = box.lo.copy(), box.hi.copy()
    lower, upper = [], []
    for layer in net.layers:
        w_pos = np.maximum(layer.weight, 0.0)
        w_neg = np.minimum(layer.weight, 0.0)
        z_lo = w_pos @ a_lo + w_neg @ a_hi + layer.bias
        z_hi = w_pos @ a_hi + w_neg @ a_lo + layer.bias
        lower.append(z_lo)
        upper.append(z_hi)
        a_lo = layer.activate(z_lo)
        a_hi = layer.activate(z_hi)
    return NeuronBounds(lower, upper)


def _backward_sweep(net, box):
    lower: list = [None] * len(net.layers)
    upper: list = [None] * len(net.layers)
    partial = NeuronBounds(lower, upper)
    for k, layer in enumerate(net.layers):
        if layer.activation == IDENTITY:
            # relaxations never consume bounds of identity layers
            continue
        A = layer.weight
        b = layer.bias
        A_lo, b_lo, A_up, b_up = _propagate_down(
            net, k - 1, A.copy(), b.copy(), A.copy(), b.copy(), partial
        )
        z_lo, z_hi = _concretize_rows(box, A_lo, b_lo, A_up, b_up)
        lower[k] = z_lo
        upper[k] = z_hi
    return partial


def _propagate_down(net, start, A_lo, b_lo, A_up, b_up, bounds):
    """Push affine bounds expressed over post-activations of layer ``start``
    down to the network input (layer index -1)."""
    for k in range(start, -1, -1):
        layer = net.layers[k]
        if layer.activation != IDENTITY:
            l, u = bounds.lower[k], bounds.upper[k]
            if l is None:
                raise DimensionError(
                    f"missing pre-activation bounds for nonlinear layer {k}"
                )
            us, ui, ls, li = _relax_arrays(layer.activation, l, u, layer.slope)
            A_up, b_up = _subst(A_up, b_up, us, ui, ls, li)
            A_lo, b_lo = _subst(A_lo, b_lo, ls, li, us, ui)
        b_up = b_up + A_up @ layer.bias
        A_up = A_up @ layer.weight
        b_lo = b_lo + A_lo @ layer.bias
        A_lo = A_lo @ layer.weight
    return A_lo, b_lo, A_up, b_up


def _subst(A, b, s_pos, i_pos, s_neg, i_neg):
    """Substitute a = act(z) into the form A a + b.  Positive coefficients
    take the (s_pos, i_pos) line, negative ones (s_neg, i_neg); passing the
    upper line as s_pos keeps an upper form, and vice versa."""
    A_pos = np.maximum(A, 0.0)
    A_neg = np.minimum(A, 0.0)
    new_A = A_pos * s_pos + A_neg * s_neg
    new_b = b + A_pos @ i_pos + A_neg @ i_neg
    return new_A, new_b


def _concretize_rows(box, A_lo, b_lo, A_up, b_up):
    c, r = box.center, box.radius
    lo = A_lo @ c - np.abs(A_lo) @ r + b_lo
    hi = A_up @ c + np.abs(A_up) @ r + b_up
    return lo, hi


# ---------------------------------------------------------------------------
# full backward pass
# ---------------------------------------------------------------------------

def backward_crown(net: Network, box: Hyperrectangle,
                   bounds: NeuronBounds | None = None,
                   tight: bool = False) -> AffineBounds:
    """Affine lower and upper bounds on N over the box.

    ``bounds`` may carry precomputed pre-activation intervals; otherwise
    they are computed here (interval sweep, or per-layer backward passes
    when ``tight``).
    """
    if box.n != net.n:
        raise DimensionError(f"box dim {box.n} vs network input {net.n}")
    if bounds is None:
        bounds = pre_activation_bounds(net, box, BACKWARD if tight else INTERVAL)
    m = net.m
    eye = np.eye(m)
    zero = np.zeros(m)
    A_lo, b_lo, A_up, b_up = _propagate_down(
        net, len(net.layers) - 1, eye, zero.copy(), eye.copy(), zero.copy(), bounds
    )
    return AffineBounds(box, A_lo, A_up, b_lo, b_up)


def concretize(ab: AffineBounds) -> tuple:
    """Interval (lo, hi) vectors attained by the affine sandwich on the box."""
    return _concretize_rows(ab.box, ab.A_low, ab.b_low, ab.A_up, ab.b_up)


def linearize_network(net: Network, box: Hyperrectangle,
                      tight: bool = False) -> CertifiedEnclosure:
    """Repackage network bounds as a certified enclosure, so a network can
    stand in as the reference function in the closeness check."""
    ab = backward_crown(net, box, tight=tight)
    return CertifiedEnclosure(ab.box, ab.A_low, ab.A_up, ab.b_low, ab.b_up)
