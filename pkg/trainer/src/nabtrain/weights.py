"""Torch MLPs and the verifier's JSON weight document format.

The document layout::

    {"version": 1, "n": ..., "m": ...,
     "layers": [{"weight": [[...], ...], "bias": [...],
                 "activation": "relu" | "leaky_relu" | "identity",
                 "slope": 0.01}, ...]}

Weight rows are output neurons (torch's native Linear orientation), the
final layer is always identity, and floats are written with repr so they
round-trip bit for bit.
"""

from __future__ import annotations

import json

import numpy as np
import torch
from torch import nn

RELU = "relu"
LEAKY_RELU = "leaky_relu"
IDENTITY = "identity"
DEFAULT_SLOPE = 0.01


def build_mlp(n: int, hidden: list[int], m: int, activation: str = RELU,
              slope: float = DEFAULT_SLOPE) -> nn.Sequential:
    if activation not in (RELU, LEAKY_RELU):
        raise ValueError(f"unsupported hidden activation {activation!r}")
    layers: list[nn.Module] = []
    widths = [n] + list(hidden)
    for a, b in zip(widths, widths[1:]):
        layers.append(nn.Linear(a, b))
        layers.append(nn.ReLU() if activation == RELU
                      else nn.LeakyReLU(slope))
    layers.append(nn.Linear(widths[-1], m))
    return nn.Sequential(*layers)


def _layer_doc(linear: nn.Linear, activation: str, slope: float | None,
               out_scale: np.ndarray | None = None) -> dict:
    w = linear.weight.detach().cpu().double().numpy()
    if out_scale is not None:
        w = w * out_scale[:, None]
    doc = {"weight": w.tolist(), "activation": activation}
    if linear.bias is not None:
        b = linear.bias.detach().cpu().double().numpy()
        if out_scale is not None:
            b = b * out_scale
        doc["bias"] = b.tolist()
    if activation == LEAKY_RELU:
        doc["slope"] = slope
    return doc


def export_network(model: nn.Sequential, path: str,
                   out_scale: np.ndarray | None = None) -> None:
    """Write an nn.Sequential of Linear/ReLU/LeakyReLU modules.

    out_scale, if given, is folded exactly into the last layer so the file
    evaluates to scale * model(x) with no extra layer.
    """
    linears = [mod for mod in model if isinstance(mod, nn.Linear)]
    acts = [mod for mod in model if not isinstance(mod, nn.Linear)]
    if len(linears) != len(acts) + 1:
        raise ValueError("expected alternating Linear/activation ending in Linear")
    layers = []
    for linear, act in zip(linears, acts):
        if isinstance(act, nn.ReLU):
            layers.append(_layer_doc(linear, RELU, None))
        elif isinstance(act, nn.LeakyReLU):
            layers.append(_layer_doc(linear, LEAKY_RELU, act.negative_slope))
        else:
            raise ValueError(f"unsupported activation module {act!r}")
    layers.append(_layer_doc(linears[-1], IDENTITY, None, out_scale))
    doc = {
        "version": 1,
        "n": linears[0].in_features,
        "m": linears[-1].out_features,
        "layers": layers,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def import_network(path: str) -> nn.Sequential:
    """Load a weight document back into a float64 torch module."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    mods: list[nn.Module] = []
    for layer in doc["layers"]:
        w = torch.tensor(layer["weight"], dtype=torch.float64)
        b = torch.tensor(layer.get("bias", [0.0] * w.shape[0]),
                         dtype=torch.float64)
        linear = nn.Linear(w.shape[1], w.shape[0], dtype=torch.float64)
        with torch.no_grad():
            linear.weight.copy_(w)
            linear.bias.copy_(b)
        mods.append(linear)
        act = layer.get("activation", IDENTITY)
        if act == RELU:
            mods.append(nn.ReLU())
        elif act == LEAKY_RELU:
            mods.append(nn.LeakyReLU(layer.get("slope", DEFAULT_SLOPE)))
        elif act != IDENTITY:
            raise ValueError(f"unsupported activation {act!r} in {path}")
    return nn.Sequential(*mods)


def export_koopman(encoder: nn.Sequential, k_map: nn.Linear,
                   decoder: nn.Sequential, out_dir: str, meta: dict) -> str:
    """Write the three component networks plus a metadata document.

    meta must carry horizon, dt, mu, lambda, domain, and epsilon; file
    names and the format marker are filled in here.  Returns the metadata
    path.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    export_network(encoder, os.path.join(out_dir, "encoder.json"))
    export_network(nn.Sequential(k_map), os.path.join(out_dir, "k_matrix.json"))
    export_network(decoder, os.path.join(out_dir, "decoder.json"))
    doc = {
        "format": "boxcert-koopman",
        "encoder": "encoder.json",
        "k_matrix": "k_matrix.json",
        "decoder": "decoder.json",
    }
    doc.update(meta)
    meta_path = os.path.join(out_dir, "model.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return meta_path
