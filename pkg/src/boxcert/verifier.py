"""Single-box certification checks.

A task asks, for one output dimension of a reference map and one box: is the
network within epsilon of the reference everywhere on the box?  The answer is
one of three verdicts.  Certified rests on two sound layers: a certified
linear enclosure of the reference and linear bounds on the network, combined
into an upper bound on the worst-case residual.  Falsified rests on nothing
but direct evaluation at a concrete point, so reported counterexamples are
always genuine.  When neither bound is conclusive the verdict asks the caller
to split the box.
"""

from dataclasses import dataclass

import numpy as np

from .crown import backward_crown, linearize_network
from .errors import DimensionError
from .geometry import Hyperrectangle
from .network import Network
from .taylor import CertifiedEnclosure, lipschitz_relaxation, taylor_expand

REMAINDER = "remainder"
RESIDUAL = "residual"

# Certification demands strictly more margin than falsification refutes, so
# the two verdicts stay mutually exclusive under floating point.
CERTIFY_SLACK = 1e-12

UPPER = "upper"
LOWER = "lower"


class AnalyticRef:
    """Reference backed by a symbolic dynamical system."""

    def __init__(self, system):
        self.system = system

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def m(self) -> int:
        return self.system.m

    def evaluate(self, x) -> np.ndarray:
        return self.system.evaluate(x)

    def enclose(self, box: Hyperrectangle, outputs=None) -> CertifiedEnclosure:
        return taylor_expand(self.system, box, outputs=outputs)

    def nonlinear_axes(self, j):
        return self.system.dependency_graph()[j]

    def probe_scores(self, box: Hyperrectangle, j: int, axes) -> np.ndarray:
        """Deviation of f_j from its tangent plane along each candidate axis.

        Perturbs the center by half the radius on one axis at a time and
        measures how far the true value lands from the first-order
        prediction.  Axes along which f_j is affine score (near) zero.
        """
        c = box.center
        f_c = float(self.system.evaluate(c)[j])
        grad = self.system.jacobian(c)[j]
        scores = np.zeros(len(axes))
        for i, a in enumerate(axes):
            h = float(box.radius[a]) * 0.5
            if h == 0.0:
                continue
            x = c.copy()
            x[a] += h
            scores[i] = abs(float(self.system.evaluate(x)[j]) - f_c - grad[a] * h)
        return scores

    def __repr__(self):
        return f"AnalyticRef({self.system.name!r})"


class NetworkRef:
    """Reference that is itself a feed-forward network (teacher model)."""

    def __init__(self, network: Network, tight: bool = False):
        self.network = network
        self.tight = tight

    @property
    def n(self) -> int:
        return self.network.n

    @property
    def m(self) -> int:
        return self.network.m

    def evaluate(self, x) -> np.ndarray:
        return self.network.forward(x)

    def enclose(self, box: Hyperrectangle, outputs=None) -> CertifiedEnclosure:
        enc = linearize_network(self.network, box, tight=self.tight)
        if outputs is None:
            return enc
        return _slice_outputs(enc, outputs)

    def nonlinear_axes(self, j):
        return None

    def probe_scores(self, box: Hyperrectangle, j: int, axes) -> np.ndarray:
        """Rank axes by how much halving them shrinks the enclosure band."""
        parent = float(self.enclose(box, outputs=(j,)).split_width()[0])
        scores = np.zeros(len(axes))
        for i, a in enumerate(axes):
            if box.radius[a] <= 0.0:
                continue
            lo_half, hi_half = box.split(a)
            w = max(
                float(self.enclose(lo_half, outputs=(j,)).split_width()[0]),
                float(self.enclose(hi_half, outputs=(j,)).split_width()[0]),
            )
            scores[i] = parent - w
        return scores

    def __repr__(self):
        return f"NetworkRef({self.network!r})"


class LipschitzRef:
    """Black-box reference known only through evaluation and a Lipschitz bound.

    ``evaluator`` maps arrays of shape (..., n) to (..., m); ``lipschitz`` is
    a scalar or per-output bound on the infinity-norm Lipschitz constant over
    the whole domain.
    """

    def __init__(self, evaluator, lipschitz, n: int, m: int):
        if n <= 0 or m <= 0:
            raise DimensionError("reference dimensions must be positive")
        self.evaluator = evaluator
        self.lipschitz = np.broadcast_to(
            np.asarray(lipschitz, dtype=np.float64), (m,)
        ).copy()
        if np.any(self.lipschitz < 0.0) or not np.all(np.isfinite(self.lipschitz)):
            raise ValueError("Lipschitz bounds must be finite and nonnegative")
        self._n = n
        self._m = m

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return self._m

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.asarray(self.evaluator(x), dtype=np.float64)
        want = x.shape[:-1] + (self._m,)
        if out.shape != want:
            raise DimensionError(
                f"evaluator returned shape {out.shape}, expected {want}"
            )
        return out

    def enclose(self, box: Hyperrectangle, outputs=None) -> CertifiedEnclosure:
        f_c = self.evaluate(box.center)
        enc = lipschitz_relaxation(f_c, self.lipschitz, box)
        if outputs is None:
            return enc
        return _slice_outputs(enc, outputs)

    def nonlinear_axes(self, j):
        return None

    def probe_scores(self, box: Hyperrectangle, j: int, axes) -> np.ndarray:
        # the band width is driven by the largest radius, so rank by width
        return np.asarray([float(box.radius[a]) for a in axes])

    def __repr__(self):
        return f"LipschitzRef(n={self._n}, m={self._m})"


def _slice_outputs(enc: CertifiedEnclosure, outputs) -> CertifiedEnclosure:
    idx = list(outputs)
    return CertifiedEnclosure(
        enc.box,
        enc.A_low[idx],
        enc.A_up[idx],
        enc.b_low[idx],
        enc.b_up[idx],
    )


@dataclass(frozen=True)
class VerificationTask:
    box: Hyperrectangle
    j: int
    epsilon: float
    depth: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.j < 0:
            raise ValueError("output index must be nonnegative")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")


@dataclass(frozen=True)
class Certified:
    """Both residual bounds landed strictly below epsilon."""

    rho_minus: float
    rho_plus: float


@dataclass(frozen=True)
class Falsified:
    """A concrete point violating the epsilon bound, checked by evaluation."""

    point: np.ndarray
    error: float


@dataclass(frozen=True)
class Split:
    axis: int
    reason: str
    # how far the failed bound overshot; used to prioritize work in
    # early-stop mode, irrelevant to correctness
    score: float = 0.0


def _affine_max(box: Hyperrectangle, row: np.ndarray, offset: float) -> float:
    """Exact maximum of row . x + offset over the box."""
    return float(offset + row @ box.center + np.abs(row) @ box.radius)


def residual_bound(net: Network, enclosure: CertifiedEnclosure,
                   box: Hyperrectangle, j: int, side: str,
                   tight: bool = False) -> float:
    """Sound upper bound on the worst residual of one side over the box.

    side="upper" bounds max of enclosure_upper_j(x) - N_j(x); side="lower"
    bounds max of N_j(x) - enclosure_lower_j(x).  Both reduce to maximizing
    an affine function once the network is replaced by its linear bounds.
    """
    if side not in (UPPER, LOWER):
        raise ValueError(f"side must be '{UPPER}' or '{LOWER}', got {side!r}")
    ab = backward_crown(net, box, tight=tight)
    if side == UPPER:
        row = enclosure.A_up[j] - ab.A_low[j]
        off = float(enclosure.b_up[j] - ab.b_low[j])
    else:
        row = ab.A_up[j] - enclosure.A_low[j]
        off = float(ab.b_up[j] - enclosure.b_low[j])
    return _affine_max(box, row, off)


def check_box(ref, net: Network, task: VerificationTask, *,
              k_samples: int = 8, min_width=0.0, tight: bool = False):
    """Resolve one (box, output) task to Certified, Falsified, or Split.

    min_width may be a scalar or per-axis array; it only constrains which
    axes a Split verdict may name.  May raise NoAdmissibleAxisError when a
    split is needed but every useful axis is already at the width floor.
    """
    box, j, eps = task.box, task.j, task.epsilon
    if ref.n != box.n or net.n != box.n:
        raise DimensionError(
            f"box dim {box.n} vs reference n={ref.n}, network n={net.n}"
        )
    if not (0 <= j < ref.m) or net.m != ref.m:
        raise DimensionError(
            f"output {j} invalid for reference m={ref.m}, network m={net.m}"
        )

    enc = ref.enclose(box, outputs=(j,))
    width = float(enc.split_width()[0])
    if width > eps:
        axis = _pick_axis(ref, task, min_width, REMAINDER)
        return Split(axis, REMAINDER, score=width - eps)

    ab = backward_crown(net, box, tight=tight)
    row_plus = enc.A_up[0] - ab.A_low[j]
    off_plus = float(enc.b_up[0] - ab.b_low[j])
    row_minus = ab.A_up[j] - enc.A_low[0]
    off_minus = float(ab.b_up[j] - enc.b_low[0])
    rho_plus = _affine_max(box, row_plus, off_plus)
    rho_minus = _affine_max(box, row_minus, off_minus)
    worst = max(rho_plus, rho_minus)
    if worst < eps - CERTIFY_SLACK:
        return Certified(rho_minus=rho_minus, rho_plus=rho_plus)

    candidates = [
        box.center + np.sign(row_plus) * box.radius,
        box.center + np.sign(row_minus) * box.radius,
        box.center,
    ]
    if k_samples > 0:
        rng = np.random.default_rng(task.seed)
        candidates.extend(box.sample(rng, k_samples))
    points = np.asarray(candidates)
    errors = np.abs(ref.evaluate(points)[:, j] - net.forward(points)[:, j])
    for i in range(points.shape[0]):
        if errors[i] > eps:
            return Falsified(point=points[i].copy(), error=float(errors[i]))

    axis = _pick_axis(ref, task, min_width, RESIDUAL)
    return Split(axis, RESIDUAL, score=worst - eps)


def _pick_axis(ref, task: VerificationTask, min_width, reason: str) -> int:
    from .partitioner import choose_split_axis

    return choose_split_axis(
        ref, task.j, task.box,
        min_width=min_width, reason=reason, depth=task.depth,
    )


def confirm_counterexample(ref, net: Network, x, j: int, epsilon: float) -> bool:
    """Re-check a claimed counterexample by direct evaluation only."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ref.n,):
        raise DimensionError(f"point shape {x.shape} vs reference n={ref.n}")
    err = abs(float(ref.evaluate(x)[j]) - float(net.forward(x)[j]))
    return err > epsilon
