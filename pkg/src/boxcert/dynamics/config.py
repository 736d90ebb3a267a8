"""Loading and saving system descriptions as JSON documents.

Schema::

    {
      "name": "jet_engine",
      "state": ["x", "y"],
      "outputs": ["-y - 1.5*x^2 - 0.5*x^3 - 0.1", "3*x - y"],
      "domain": [[-1.0, 1.0], [-1.0, 1.0]],
      "epsilon": 0.039,
      "time": "continuous"
    }

Expressions use the infix grammar of :func:`boxcert.dynamics.expr.parse_expr`
over the declared state names.  ``epsilon`` and ``time`` are optional
(``time`` defaults to continuous).
"""

from __future__ import annotations

import json

from ..errors import ConfigError
from ..geometry import Hyperrectangle
from .expr import parse_expr
from .system import CONTINUOUS, DISCRETE, DynamicalSystem


def system_from_dict(doc: dict) -> DynamicalSystem:
    try:
        name = doc["name"]
        state = list(doc["state"])
        outputs = list(doc["outputs"])
        domain = doc["domain"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"system description missing field: {exc}") from exc
    if not state or not all(isinstance(s, str) for s in state):
        raise ConfigError("state must be a non-empty list of variable names")
    if len(domain) != len(state):
        raise ConfigError("domain must list one [lo, hi] pair per state variable")
    try:
        lo = [float(pair[0]) for pair in domain]
        hi = [float(pair[1]) for pair in domain]
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad domain bounds: {exc}") from exc
    if any(h < l for l, h in zip(lo, hi)):
        raise ConfigError("domain upper bounds must not be below lower bounds")
    time_kind = doc.get("time", CONTINUOUS)
    if time_kind not in (CONTINUOUS, DISCRETE):
        raise ConfigError(f"time must be {CONTINUOUS!r} or {DISCRETE!r}")
    exprs = [parse_expr(text, state) for text in outputs]
    epsilon = doc.get("epsilon")
    return DynamicalSystem(
        name, len(state), exprs, Hyperrectangle.from_bounds(lo, hi),
        default_epsilon=epsilon, time_kind=time_kind,
    )


def load_system(path) -> DynamicalSystem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return system_from_dict(doc)


def system_to_dict(sys: DynamicalSystem) -> dict:
    names = [f"x{i}" for i in range(sys.n)]
    return {
        "name": sys.name,
        "state": names,
        "outputs": [str(e) for e in sys.outputs],
        "domain": [[float(l), float(h)] for l, h in zip(sys.domain.lo, sys.domain.hi)],
        "epsilon": sys.default_epsilon,
        "time": sys.time_kind,
    }


def save_system(sys: DynamicalSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_dict(sys), fh, indent=2)
        fh.write("\n")
