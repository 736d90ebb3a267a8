"""Abstraction-net training and teacher-student distillation.

The loss is the sum of the batch-mean Euclidean error and lambda_max times
the batch-maximum componentwise error, so the optimizer pushes down the
worst point as well as the average.  Hard-example mining keeps the pool's
worst twentieth in rotation, and the best held-out checkpoint is what gets
exported.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .specs import TrainSpec
from .systems import System
from .weights import build_mlp, export_network, import_network

HELD_OUT_SAMPLES = 1_000_000


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite."""

    def __init__(self, step: int, loss: float, lr: float):
        super().__init__(
            f"loss became {loss} at step {step} (lr {lr:.3g}); "
            "lower the learning rate or loosen lambda_max"
        )
        self.step = step
        self.loss = loss
        self.lr = lr


@dataclass
class TrainResult:
    export_path: str | None
    mean_err: float
    max_err: float
    steps_run: int
    seconds: float
    loss_history: list[float] = field(repr=False, default_factory=list)
    model: object = field(repr=False, default=None)
    out_scale: np.ndarray | None = field(repr=False, default=None)


def _sample(system: System, rng: np.random.Generator, k: int,
            spec: TrainSpec, focus_fraction: float | None = None) -> np.ndarray:
    xs = system.sample(rng, k)
    frac = spec.focus_fraction if focus_fraction is None else focus_fraction
    ax = spec.focus_axis
    if ax is not None and frac > 0:
        kf = int(k * frac)
        lo, hi = system.lo[ax], system.hi[ax]
        dev = rng.normal(0.0, spec.focus_scale, size=kf)
        c = spec.focus_center
        if c <= lo:
            vals = lo + np.abs(dev)
        elif c >= hi:
            vals = hi - np.abs(dev)
        else:
            vals = c + dev
        xs[:kf, ax] = np.clip(vals, lo, hi)
    return xs


def train_abstraction(spec: TrainSpec, label_fn=None, log=None) -> TrainResult:
    """Train one net against spec's system (or label_fn) and export it.

    label_fn, when given, replaces the system's own vector field as the
    label source; the system still provides the domain.  Returns held-out
    mean and max componentwise errors measured on a fresh million-point
    sample.
    """
    log = log if log is not None else (lambda msg: print(msg, file=sys.stderr))
    system = spec.resolve()
    f = label_fn if label_fn is not None else system.evaluate
    dtype = torch.float32 if spec.dtype == "float32" else torch.float64
    torch.manual_seed(20240817 + spec.seed)
    rng = np.random.default_rng(20240817 + spec.seed)

    model = build_mlp(system.n, spec.hidden, system.m, spec.activation,
                      spec.slope).to(dtype)

    pool_n = max(spec.pool_size, spec.batch_size)
    xp = _sample(system, rng, pool_n, spec)
    yp = np.asarray(f(xp), dtype=np.float64)
    if spec.scale_outputs:
        scale = np.maximum(np.abs(yp).max(axis=0), 1e-9)
    else:
        scale = np.ones(system.m)
    xpool = torch.tensor(xp, dtype=dtype)
    ypool = torch.tensor(yp / scale, dtype=dtype)
    # the in-training eval set is oversampled near the focus region too,
    # otherwise early stopping would look at the easy part of the domain
    xe = _sample(system, rng, spec.eval_size, spec,
                 0.3 if spec.focus_axis is not None else 0.0)
    xe_t = torch.tensor(xe, dtype=dtype)
    ye = torch.tensor(np.asarray(f(xe)) / scale, dtype=dtype)
    scale_t = torch.tensor(scale, dtype=dtype)

    t0 = time.time()
    history: list[float] = []
    hard_idx = None
    best_err, best_state = math.inf, None
    n_hard = int(spec.batch_size * spec.hard_fraction)
    steps_run = 0
    if spec.iterations > 0:
        opt = torch.optim.AdamW(model.parameters(), lr=spec.lr,
                                weight_decay=spec.weight_decay)
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(
            opt, T_max=spec.iterations, eta_min=spec.lr_floor)
        for step in range(spec.iterations):
            idx = torch.randint(0, pool_n, (spec.batch_size,))
            if hard_idx is not None and n_hard:
                idx[:n_hard] = hard_idx[
                    torch.randint(0, len(hard_idx), (n_hard,))]
            resid = model(xpool[idx]) - ypool[idx]
            loss = resid.norm(dim=1).mean() + spec.lambda_max * resid.abs().max()
            loss_val = loss.item()
            if not math.isfinite(loss_val):
                raise TrainingDiverged(step, loss_val,
                                       sched.get_last_lr()[0])
            history.append(loss_val)
            opt.zero_grad()
            loss.backward()
            if spec.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(),
                                               spec.grad_clip)
            opt.step()
            sched.step()
            steps_run = step + 1
            if steps_run % spec.eval_every == 0 or step == spec.iterations - 1:
                with torch.no_grad():
                    err = ((model(xe_t) - ye) * scale_t).abs().max().item()
                    pool_err = (model(xpool) - ypool).abs().amax(dim=1)
                hard_idx = torch.topk(pool_err, max(1, pool_n // 20)).indices
                if err < best_err:
                    best_err = err
                    best_state = {k: v.clone()
                                  for k, v in model.state_dict().items()}
                log(f"  step {steps_run}: loss {history[-1]:.5f} "
                    f"held-out max {err:.5f} ({time.time() - t0:.0f}s)")
                if spec.target_max_err is not None and err < spec.target_max_err:
                    break
    if best_state is not None:
        model.load_state_dict(best_state)

    model = model.double()
    xf = _sample(system, rng, HELD_OUT_SAMPLES, spec, 0.0)
    with torch.no_grad():
        pf = model(torch.tensor(xf, dtype=torch.float64)).numpy() * scale
    gap = np.abs(np.asarray(f(xf)) - pf).max(axis=1)
    mean_err, max_err = float(gap.mean()), float(gap.max())
    log(f"held out ({HELD_OUT_SAMPLES} pts): mean {mean_err:.6f} "
        f"max {max_err:.6f}")
    if spec.export_path:
        export_network(model, spec.export_path,
                       out_scale=scale if spec.scale_outputs else None)
        log(f"wrote {spec.export_path}")
    return TrainResult(spec.export_path, mean_err, max_err, steps_run,
                       time.time() - t0, history, model, scale)


def distill(teacher_path: str, spec: TrainSpec, log=None) -> TrainResult:
    """Train spec's net to replicate a saved teacher's input-output map.

    Labels come only from teacher forward passes on uniform domain
    samples; the underlying system is never consulted.
    """
    teacher = import_network(teacher_path)
    teacher.eval()

    def labels(x: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return teacher(torch.tensor(x, dtype=torch.float64)).numpy()

    return train_abstraction(spec, label_fn=labels, log=log)
