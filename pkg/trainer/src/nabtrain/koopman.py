"""Koopman-style model training: encoder, linear latent map, decoder.

The model lifts a 2-d state into a 64-d latent space where one matrix K
advances time; training drives reconstruction, multi-step prediction
through powers of K, and latent linearity simultaneously.  Architecture is
fixed (encoder 2->32->64 with one ReLU hidden layer, bias-free K, decoder
64->32->2) and recorded in the exported metadata so downstream tooling
never has to guess.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .systems import (
    QUADRATIC_DT,
    QUADRATIC_LAMBDA,
    QUADRATIC_MU,
    builtin_system,
)
from .trajectories import generate_trajectories
from .weights import export_koopman


@dataclass
class KoopmanSpec:
    horizon: int = 50
    lift_dim: int = 64
    hidden: int = 32
    iterations: int = 20_000
    batch_size: int = 512
    lr: float = 1e-3
    weight_decay: float = 1e-5
    linearity_weight: float = 0.3
    decode_samples: int = 10
    n_train: int = 60_000
    n_val: int = 20_000
    seed: int = 31
    grad_clip: float = 1.0
    eval_every: int = 500
    eval_steps: tuple = (1, 5, 10, 25, 50)
    epsilon: float = 0.1
    export_dir: str | None = None

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        self.eval_steps = tuple(
            t for t in self.eval_steps if 1 <= t <= self.horizon
        )


@dataclass
class KoopmanResult:
    meta_path: str | None
    val_mse: float
    worst_step_err: float
    steps_run: int
    seconds: float
    loss_history: list[float] = field(repr=False, default_factory=list)
    model: "KoopmanModel | None" = field(repr=False, default=None)


class KoopmanModel(nn.Module):
    def __init__(self, n: int = 2, hidden: int = 32, lift: int = 64):
        super().__init__()
        self.enc = nn.Sequential(nn.Linear(n, hidden), nn.ReLU(),
                                 nn.Linear(hidden, lift))
        self.K = nn.Linear(lift, lift, bias=False)
        self.dec = nn.Sequential(nn.Linear(lift, hidden), nn.ReLU(),
                                 nn.Linear(hidden, n))

    def rollout(self, x0: torch.Tensor, horizon: int) -> list[torch.Tensor]:
        z = self.enc(x0)
        zs = [z]
        for _ in range(horizon):
            z = self.K(z)
            zs.append(z)
        return zs


def _quadratic_trajectories(k: int, horizon: int, seed: int) -> np.ndarray:
    batch = generate_trajectories(builtin_system("quadratic"), k, horizon,
                                  QUADRATIC_DT, seed=seed)
    return batch.data


def train_koopman(spec: KoopmanSpec, trajectories: np.ndarray | None = None,
                  log=None) -> KoopmanResult:
    """Fit the model and export the three weight files plus metadata.

    trajectories, when given, is a (count, horizon + 1, 2) array; by
    default they are rolled out from the quadratic benchmark map.  The
    checkpoint with the lowest worst-case eval-step error is what gets
    exported.
    """
    log = log if log is not None else (lambda msg: print(msg, file=sys.stderr))
    torch.manual_seed(spec.seed)
    rng = np.random.default_rng(spec.seed)
    H = spec.horizon

    if trajectories is None:
        trajectories = _quadratic_trajectories(spec.n_train + spec.n_val, H,
                                               spec.seed)
    trajectories = np.asarray(trajectories, dtype=np.float64)
    if trajectories.ndim != 3 or trajectories.shape[1] != H + 1:
        raise ValueError(
            f"expected (count, {H + 1}, n) trajectories, "
            f"got {trajectories.shape}")
    n_state = trajectories.shape[2]
    k_total = trajectories.shape[0]
    n_val = min(spec.n_val, max(1, k_total // 4))
    # time-major copies make the per-step indexing below contiguous
    train_t = torch.tensor(trajectories[n_val:].transpose(1, 0, 2),
                           dtype=torch.float32)
    val_t = torch.tensor(trajectories[:n_val].transpose(1, 0, 2),
                         dtype=torch.float32)
    pool = train_t.shape[1]

    model = KoopmanModel(n_state, spec.hidden, spec.lift_dim)
    opt = torch.optim.AdamW(model.parameters(), lr=spec.lr,
                            weight_decay=spec.weight_decay)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=max(1, spec.iterations), eta_min=1e-6)

    n_dec = min(spec.decode_samples, H)
    t0 = time.time()
    history: list[float] = []
    best_err, best_state = math.inf, None
    steps_run = 0
    for step in range(spec.iterations):
        idx = torch.randint(0, pool, (spec.batch_size,))
        x = train_t[:, idx]
        zs = model.rollout(x[0], H)
        loss = ((model.dec(zs[0]) - x[0]) ** 2).mean()
        if n_dec:
            ts = 1 + rng.choice(H, size=n_dec, replace=False)
            pred = sum(((model.dec(zs[t]) - x[t]) ** 2).mean() for t in ts)
            lin = sum(((zs[t] - model.enc(x[t])) ** 2).mean() for t in ts)
            loss = loss + pred / n_dec + spec.linearity_weight * lin / n_dec
        loss_val = loss.item()
        if not math.isfinite(loss_val):
            raise RuntimeError(f"koopman loss became {loss_val} at step {step}")
        history.append(loss_val)
        opt.zero_grad()
        loss.backward()
        if spec.grad_clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(), spec.grad_clip)
        opt.step()
        sched.step()
        steps_run = step + 1
        if steps_run % spec.eval_every == 0 or step == spec.iterations - 1:
            worst = _worst_step_err(model, val_t, spec.eval_steps, H)
            if worst < best_err:
                best_err = worst
                best_state = {k: v.clone()
                              for k, v in model.state_dict().items()}
            log(f"  step {steps_run}: loss {history[-1]:.6f} "
                f"worst step err {worst:.4f} ({time.time() - t0:.0f}s)")
    if best_state is not None:
        model.load_state_dict(best_state)
    model = model.double()

    val64 = val_t.double()
    with torch.no_grad():
        zs = model.rollout(val64[0], H)
        sse, count = 0.0, 0
        for t in range(H + 1):
            d = model.dec(zs[t]) - val64[t]
            sse += float((d ** 2).sum())
            count += d.numel()
    val_mse = sse / count
    worst = _worst_step_err(model, val64, spec.eval_steps, H)
    log(f"validation MSE over steps 0..{H}: {val_mse:.6f}; "
        f"worst eval-step err {worst:.4f}")

    meta_path = None
    if spec.export_dir:
        meta = {
            "horizon": H,
            "dt": QUADRATIC_DT,
            "mu": QUADRATIC_MU,
            "lambda": QUADRATIC_LAMBDA,
            "domain": [[-0.5, 0.5], [-0.5, 0.5]],
            "epsilon": spec.epsilon,
            "lift_dim": spec.lift_dim,
        }
        meta_path = export_koopman(model.enc, model.K, model.dec,
                                   spec.export_dir, meta)
        log(f"wrote {meta_path}")
    return KoopmanResult(meta_path, val_mse, worst, steps_run,
                         time.time() - t0, history, model)


def _worst_step_err(model: KoopmanModel, traj_t: torch.Tensor,
                    eval_steps, horizon: int) -> float:
    if not eval_steps:
        eval_steps = (0,)
    with torch.no_grad():
        zs = model.rollout(traj_t[0], horizon)
        return max(
            float((model.dec(zs[t]) - traj_t[t]).abs().max())
            for t in eval_steps
        )
