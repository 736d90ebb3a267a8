"""Training run descriptions."""

from __future__ import annotations

from dataclasses import dataclass, field

from .systems import System, resolve_system

ACTIVATIONS = ("relu", "leaky_relu")


@dataclass
class TrainSpec:
    """Everything needed to train one abstraction net.

    system is a builtin name, a path to a JSON system description, or a
    System instance.  The loss balances mean error against the batch
    maximum with weight lambda_max; target_max_err, when set, stops
    training early once the held-out maximum drops below it.
    """

    system: str | System
    hidden: list[int] = field(default_factory=lambda: [12])
    activation: str = "relu"
    slope: float = 0.01
    lambda_max: float = 0.001
    lr: float = 1e-3
    lr_floor: float = 1e-6
    weight_decay: float = 1e-4
    iterations: int = 50_000
    batch_size: int = 4096
    seed: int = 0
    export_path: str | None = None
    target_max_err: float | None = None
    pool_size: int = 400_000
    eval_size: int = 200_000
    eval_every: int = 500
    hard_fraction: float = 0.25
    grad_clip: float = 1.0
    scale_outputs: bool = False
    focus_axis: int | None = None
    focus_fraction: float = 0.0
    focus_scale: float = 0.05
    focus_center: float = 0.0
    dtype: str = "float64"

    def __post_init__(self):
        if self.lambda_max < 0:
            raise ValueError("lambda_max must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not 0.0 <= self.hard_fraction < 1.0:
            raise ValueError("hard_fraction must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")
        self.hidden = [int(h) for h in self.hidden]

    def resolve(self) -> System:
        if isinstance(self.system, System):
            return self.system
        return resolve_system(self.system)
