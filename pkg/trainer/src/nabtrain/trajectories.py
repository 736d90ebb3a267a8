"""Trajectory dataset generation and the verifier's dataset file format.

Continuous systems are integrated with scipy's adaptive RK45 at tight
tolerances and sampled on the uniform dt grid; discrete systems iterate
their map directly.  Files are plain text::

    # boxcert-trajectories 1 n=<n> trajectories=<k> steps=<s> dt=<dt>
    <traj index> <step index> <x_0> ... <x_{n-1}>
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .systems import DISCRETE, System

_MAGIC = "# boxcert-trajectories 1"


@dataclass
class TrajectoryBatch:
    data: np.ndarray  # (trajectories, steps + 1, n)
    dt: float
    failed: list[int] = field(default_factory=list)

    @property
    def ok(self) -> np.ndarray:
        """Only the trajectories that integrated cleanly."""
        if not self.failed:
            return self.data
        keep = np.ones(self.data.shape[0], dtype=bool)
        keep[self.failed] = False
        return self.data[keep]


def generate_trajectories(system: System, n_traj: int, steps: int, dt: float,
                          seed: int = 0, rtol: float = 1e-10,
                          atol: float = 1e-12,
                          initial_conditions=None) -> TrajectoryBatch:
    """Roll n_traj trajectories of the given length from uniform random
    initial conditions (or the provided ones)."""
    rng = np.random.default_rng(seed)
    if initial_conditions is None:
        x0s = system.sample(rng, n_traj)
    else:
        x0s = np.asarray(initial_conditions, dtype=np.float64)
        if x0s.shape != (n_traj, system.n):
            raise ValueError(
                f"expected {(n_traj, system.n)} initial conditions, "
                f"got {x0s.shape}")
    data = np.full((n_traj, steps + 1, system.n), np.nan)
    data[:, 0] = x0s
    failed: list[int] = []
    if steps == 0:
        return TrajectoryBatch(data, dt, failed)

    if system.time_kind == DISCRETE:
        cur = x0s.copy()
        for s in range(1, steps + 1):
            cur = system.evaluate(cur)
            data[:, s] = cur
        return TrajectoryBatch(data, dt, failed)

    if system.m != system.n:
        raise ValueError(
            f"{system.name} maps {system.n} states to {system.m} outputs; "
            "only square systems define trajectories")

    def rhs(_t, y):
        return system.evaluate(y[None, :])[0]

    t_grid = np.arange(steps + 1) * dt
    for i in range(n_traj):
        sol = solve_ivp(rhs, (0.0, steps * dt), x0s[i], method="RK45",
                        t_eval=t_grid, rtol=rtol, atol=atol)
        if not sol.success or sol.y.shape[1] != steps + 1:
            failed.append(i)
            print(f"trajectory {i} from {x0s[i]} failed: {sol.message}",
                  file=sys.stderr)
            continue
        data[i] = sol.y.T
    return TrajectoryBatch(data, dt, failed)


def save_trajectories(path: str, data: np.ndarray, dt: float) -> None:
    """Write an array of shape (trajectories, steps + 1, n)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"expected (trajectories, steps+1, n), got {data.shape}")
    if np.isnan(data).any():
        raise ValueError("refusing to write NaNs; drop failed trajectories first")
    k, s1, n = data.shape
    lines = [f"{_MAGIC} n={n} trajectories={k} steps={s1 - 1} dt={dt!r}"]
    for t in range(k):
        for s in range(s1):
            coords = " ".join(repr(float(v)) for v in data[t, s])
            lines.append(f"{t} {s} {coords}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trajectories(path: str):
    """Read a dataset file back; returns (data, dt)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise ValueError(f"{path}: not a trajectory file")
    header = dict(kv.split("=", 1) for kv in lines[0][len(_MAGIC):].split())
    n = int(header["n"])
    k = int(header["trajectories"])
    steps = int(header["steps"])
    dt = float(header["dt"])
    data = np.full((k, steps + 1, n), np.nan)
    for line in lines[1:]:
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        toks = line.split()
        data[int(toks[0]), int(toks[1])] = [float(v) for v in toks[2:]]
    if np.isnan(data).any():
        raise ValueError(f"{path}: missing samples")
    return data, dt
