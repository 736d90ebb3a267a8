"""Feed-forward networks and their weight document format.

A network is a sequence of dense layers, each with an activation drawn from
{relu, leaky_relu, identity}.  The last layer's activation must be identity
(regression head).  Weight documents are JSON::

    {
      "version": 1,
      "n": 2,
      "m": 2,
      "layers": [
        {"weight": [[...], ...], "bias": [...], "activation": "relu"},
        {"weight": [[...], ...], "activation": "leaky_relu", "slope": 0.01},
        {"weight": [[...], ...], "bias": [...], "activation": "identity"}
      ]
    }

``weight`` is row-major (out_features rows of in_features columns), ``bias``
is optional (defaults to zero), ``slope`` is required exactly for
leaky_relu and must lie strictly between 0 and 1.  Serialized floats use
``repr`` so a save/load round trip reproduces every double bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, WeightFormatError

RELU = "relu"
LEAKY_RELU = "leaky_relu"
IDENTITY = "identity"

_ACTIVATIONS = (RELU, LEAKY_RELU, IDENTITY)


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str
    slope: float | None = None

    def __post_init__(self):
        w = self.weight
        if w.ndim != 2:
            raise WeightFormatError("layer weight must be a matrix")
        if self.bias.shape != (w.shape[0],):
            raise WeightFormatError("bias length must equal the output width")
        if self.activation not in _ACTIVATIONS:
            raise WeightFormatError(f"unknown activation {self.activation!r}")
        if self.activation == LEAKY_RELU:
            if self.slope is None or not (0.0 < self.slope < 1.0):
                raise WeightFormatError(
                    "leaky_relu slope must be strictly between 0 and 1"
                )
        elif self.slope is not None:
            raise WeightFormatError(f"{self.activation} takes no slope")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(self.bias))):
            raise WeightFormatError("weights and biases must be finite")

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def preactivation(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T + self.bias

    def activate(self, z: np.ndarray) -> np.ndarray:
        if self.activation == RELU:
            return np.maximum(z, 0.0)
        if self.activation == LEAKY_RELU:
            return np.where(z >= 0.0, z, self.slope * z)
        return z


def _freeze(a):
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.setflags(write=False)
    return a


class Network:
    """Dense feed-forward network x -> layers(x), ending in an identity head."""

    def __init__(self, layers):
        layers = tuple(layers)
        if not layers:
            raise WeightFormatError("a network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.in_features != prev.out_features:
                raise WeightFormatError(
                    f"layer width mismatch: {prev.out_features} -> {nxt.in_features}"
                )
        if layers[-1].activation != IDENTITY:
            raise WeightFormatError("the final layer activation must be identity")
        self.layers = layers

    @property
    def n(self) -> int:
        return self.layers[0].in_features

    @property
    def m(self) -> int:
        return self.layers[-1].out_features

    def forward(self, x) -> np.ndarray:
        """Evaluate at points of shape (..., n); returns (..., m)."""
        a = np.asarray(x, dtype=np.float64)
        if a.shape[-1] != self.n:
            raise DimensionError(f"input of shape {a.shape} vs n={self.n}")
        for layer in self.layers:
            a = layer.activate(layer.preactivation(a))
        return a

    def __repr__(self):
        widths = [self.n] + [l.out_features for l in self.layers]
        return f"Network({'-'.join(str(w) for w in widths)})"


def make_layer(weight, bias=None, activation=IDENTITY, slope=None) -> Layer:
    weight = _freeze(weight)
    if weight.ndim != 2:
        raise WeightFormatError("layer weight must be a matrix")
    if bias is None:
        bias = np.zeros(weight.shape[0])
    bias = _freeze(bias)
    return Layer(weight, bias, activation, None if slope is None else float(slope))


def chain(*networks) -> Network:
    """Compose networks left to right: chain(a, b)(x) == b(a(x))."""
    if len(networks) == 1 and not isinstance(networks[0], Network):
        networks = tuple(networks[0])
    if not networks:
        raise WeightFormatError("chain of zero networks")
    layers = []
    for prev, nxt in zip(networks, networks[1:]):
        if nxt.n != prev.m:
            raise DimensionError(
                f"cannot chain: output width {prev.m} feeds input width {nxt.n}"
            )
    for net in networks:
        layers.extend(net.layers)
    return Network(layers)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def network_to_dict(net: Network) -> dict:
    layers = []
    for layer in net.layers:
        doc = {
            "weight": [[float(v) for v in row] for row in layer.weight],
            "bias": [float(v) for v in layer.bias],
            "activation": layer.activation,
        }
        if layer.activation == LEAKY_RELU:
            doc["slope"] = float(layer.slope)
        layers.append(doc)
    return {"version": 1, "n": net.n, "m": net.m, "layers": layers}


def save_weights(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)
        fh.write("\n")


def network_from_dict(doc: dict) -> Network:
    if not isinstance(doc, dict):
        raise WeightFormatError("weight document must be a JSON object")
    if doc.get("version") != 1:
        raise WeightFormatError(f"unsupported weight version {doc.get('version')!r}")
    try:
        layer_docs = list(doc["layers"])
        n, m = int(doc["n"]), int(doc["m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFormatError(f"malformed weight document: {exc}") from exc
    if not layer_docs:
        raise WeightFormatError("weight document lists no layers")
    layers = []
    for k, ld in enumerate(layer_docs):
        try:
            weight = np.asarray(ld["weight"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise WeightFormatError(f"layer {k}: bad weight: {exc}") from exc
        bias = ld.get("bias")
        activation = ld.get("activation", IDENTITY)
        slope = ld.get("slope")
        try:
            layers.append(make_layer(weight, bias, activation, slope))
        except WeightFormatError as exc:
            raise WeightFormatError(f"layer {k}: {exc}") from exc
    net = Network(layers)
    if net.n != n or net.m != m:
        raise WeightFormatError(
            f"declared n={n}, m={m} but layers map {net.n} -> {net.m}"
        )
    return net


def load_weights(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightFormatError(f"{path}: not valid JSON: {exc}") from exc
    return network_from_dict(doc)
