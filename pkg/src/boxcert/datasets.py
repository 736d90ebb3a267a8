"""Trajectory dataset files.

Plain text, whitespace separated.  The first line is a header carrying the
state dimension, step count, and time step; every following non-comment
line is one sample:

    # boxcert-trajectories 1 n=<n> trajectories=<k> steps=<s> dt=<dt>
    <traj index> <step index> <x_0> ... <x_{n-1}>

Step index 0 is the initial condition.  Floats are written with repr and
round-trip exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError

_MAGIC = "# boxcert-trajectories 1"


def save_trajectories(path, data, dt: float) -> None:
    """Write an array of shape (trajectories, steps + 1, n)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"expected (trajectories, steps+1, n), got {data.shape}")
    k, s1, n = data.shape
    lines = [f"{_MAGIC} n={n} trajectories={k} steps={s1 - 1} dt={dt!r}"]
    for t in range(k):
        for s in range(s1):
            coords = " ".join(repr(float(v)) for v in data[t, s])
            lines.append(f"{t} {s} {coords}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trajectories(path):
    """Read a trajectory file; returns (data, dt) with data of shape
    (trajectories, steps + 1, n)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise ParseError(f"{path}: not a trajectory file")
    header = dict(kv.split("=", 1) for kv in lines[0][len(_MAGIC):].split())
    try:
        n = int(header["n"])
        k = int(header["trajectories"])
        steps = int(header["steps"])
        dt = float(header["dt"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad header: {exc}") from exc
    data = np.full((k, steps + 1, n), np.nan)
    for ln_no, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        toks = line.split()
        try:
            t, s = int(toks[0]), int(toks[1])
            vals = [float(v) for v in toks[2:]]
            if len(vals) != n:
                raise ValueError(f"expected {n} coordinates, got {len(vals)}")
            data[t, s] = vals
        except (IndexError, ValueError) as exc:
            raise ParseError(f"{path}:{ln_no}: {exc}") from exc
    if np.any(np.isnan(data)):
        raise ParseError(f"{path}: missing samples for some (trajectory, step)")
    return data, dt
