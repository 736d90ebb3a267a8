"""Domain-wide verification by adaptive input splitting.

The domain is gridded once, then every (box, output) pair becomes a work
item on a shared last-in-first-out stack.  Items resolve to certified,
falsified, or unknown; a split verdict pushes the two half-boxes back onto
the stack.  With several workers the stack lives in the coordinating
process and workers only ever see one task at a time, so results cannot
depend on scheduling.

Unknown is a first-class outcome: depth and width floors convert would-be
endless refinement near the decision boundary into quantified unknown
volume, and unknown volume counts against the certified fraction.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import math
import multiprocessing
import queue as queue_mod
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    EnclosureUnavailableError,
    NoAdmissibleAxisError,
    ParseError,
    WorkerError,
)
from .geometry import Hyperrectangle
from .network import Network
from .verifier import (
    REMAINDER,
    RESIDUAL,
    Certified,
    Falsified,
    Split,
    VerificationTask,
    check_box,
)

CERTIFIED = "certified"
FALSIFIED = "falsified"
UNKNOWN = "unknown"

DEFAULT_MIN_WIDTH_FRACTION = 1e-4
DEFAULT_MAX_DEPTH = 60
ROUND_ROBIN_PERIOD = 4

_REGION_MAGIC = "# boxcert-regions 1"


# ----------------------------------------------------------------------
# configuration


@dataclass
class PartitionConfig:
    workers: int = 1
    grid: object = None          # None, int, or per-axis sequence
    min_width: object = None     # None, scalar, or per-axis array
    max_depth: int = DEFAULT_MAX_DEPTH
    seed: int = 0
    k_samples: int = 8
    tight: bool = False
    stop_on_first_counterexample: bool = False
    time_budget: object = None   # seconds, or None for unlimited
    trace_splits: bool = False


def _resolve_grid(domain: Hyperrectangle, grid) -> tuple:
    n = domain.n
    if grid is None:
        counts = [2 if n <= 3 else 1] * n
    elif isinstance(grid, (int, np.integer)):
        counts = [int(grid)] * n
    else:
        try:
            counts = [int(g) for g in grid]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid must be an int or a sequence of ints: {exc}") from exc
        if len(counts) != n:
            raise ConfigError(f"grid needs {n} entries, got {len(counts)}")
    for a, g in enumerate(counts):
        if g < 1:
            raise ConfigError(f"grid count on axis {a} must be >= 1, got {g}")
        if domain.width[a] == 0.0:
            counts[a] = 1
    return tuple(counts)


def _resolve_min_width(domain: Hyperrectangle, min_width) -> np.ndarray:
    if min_width is None:
        resolved = DEFAULT_MIN_WIDTH_FRACTION * domain.width
    else:
        resolved = np.broadcast_to(
            np.asarray(min_width, dtype=np.float64), (domain.n,)
        ).copy()
    bad = (resolved <= 0.0) & (domain.width > 0.0)
    if np.any(bad):
        raise ConfigError(
            f"min_width must be positive on non-degenerate axes, got {resolved}"
        )
    return resolved


# ----------------------------------------------------------------------
# splitting primitives


def split_box(box: Hyperrectangle, axis: int):
    """Halve a box along one axis; children tile the parent exactly."""
    return box.split(axis)


def initial_partition(domain: Hyperrectangle, grid=None) -> list:
    """Regular grid over the domain.

    Neighbouring cells share edge coordinates exactly, so the grid tiles
    the domain with no gaps.  Default granularity is 2 cells per axis in
    low dimension (n <= 3) and a single cell otherwise.
    """
    counts = _resolve_grid(domain, grid)
    edges = [
        np.linspace(domain.lo[a], domain.hi[a], counts[a] + 1)
        for a in range(domain.n)
    ]
    boxes = []
    for idx in itertools.product(*(range(g) for g in counts)):
        lo = np.array([edges[a][i] for a, i in enumerate(idx)])
        hi = np.array([edges[a][i + 1] for a, i in enumerate(idx)])
        boxes.append(Hyperrectangle.from_bounds(lo, hi))
    return boxes


def choose_split_axis(ref, j: int, box: Hyperrectangle, *,
                      min_width=0.0, reason: str = RESIDUAL,
                      depth: int = 0) -> int:
    """Pick the axis whose refinement most helps the failing bound.

    Remainder-driven splits only consider axes entering reference output j
    non-affinely, since splitting any other axis leaves the Taylor remainder
    unchanged.  Residual-driven splits may use any axis.  Every fourth split
    along a lineage ignores the ranking and round-robins over all axes still
    above the width floor, so no axis is starved forever.  References without
    a symbolic dependency graph treat every axis as a candidate.
    """
    minw = np.broadcast_to(np.asarray(min_width, dtype=np.float64), (box.n,))
    width = box.width
    splittable = [
        a for a in range(box.n) if width[a] > 0.0 and width[a] >= minw[a]
    ]
    if not splittable:
        raise NoAdmissibleAxisError(
            f"output {j}: every axis is below the width floor"
        )
    if depth % ROUND_ROBIN_PERIOD == ROUND_ROBIN_PERIOD - 1:
        return splittable[(depth // ROUND_ROBIN_PERIOD) % len(splittable)]

    nonlinear = ref.nonlinear_axes(j)
    if nonlinear is None or reason == RESIDUAL:
        candidates = splittable
    else:
        candidates = [a for a in splittable if a in nonlinear]
        if not candidates:
            raise NoAdmissibleAxisError(
                f"output {j}: no non-affine axis above the width floor"
            )
    scores = np.asarray(ref.probe_scores(box, j, candidates), dtype=np.float64)
    best = max(
        range(len(candidates)),
        key=lambda i: (scores[i], width[candidates[i]], -candidates[i]),
    )
    return candidates[best]


# ----------------------------------------------------------------------
# work items and terminal records


@dataclass(frozen=True)
class WorkItem:
    task: VerificationTask
    parent: object = None   # id of the item this one was split from
    score: float = math.inf


@dataclass(frozen=True)
class TerminalRecord:
    box: Hyperrectangle
    j: int
    status: str
    witness: object = None  # tuple of floats for falsified records
    error: object = None

    def sort_key(self):
        return (
            self.j,
            tuple(float(v) for v in self.box.lo),
            tuple(float(v) for v in self.box.hi),
            self.status,
            self.witness if self.witness is not None else (),
            self.error if self.error is not None else 0.0,
        )


@dataclass
class CoverageReport:
    domain: Hyperrectangle
    epsilon: float
    n_outputs: int
    records: tuple
    boxes_checked: int
    splits: int
    wall_time: float
    early_stopped: bool
    seed: int
    workers: int
    split_log: tuple = ()

    @property
    def certified_fraction(self) -> float:
        if all(r.status == CERTIFIED for r in self.records) and self.records:
            return 1.0
        dom_vol = self.domain.volume()
        if dom_vol == 0.0:
            return 0.0
        per = self.per_output()
        return math.fsum(per[j][CERTIFIED] for j in per) / (
            dom_vol * self.n_outputs
        )

    @property
    def counterexamples(self) -> tuple:
        return tuple(
            (np.asarray(r.witness), r.j, r.error)
            for r in self.records
            if r.status == FALSIFIED
        )

    @property
    def unknown_boxes(self) -> tuple:
        return tuple((r.box, r.j) for r in self.records if r.status == UNKNOWN)

    def per_output(self) -> dict:
        out = {
            j: {CERTIFIED: 0.0, UNKNOWN: 0.0, FALSIFIED: 0.0, "counterexamples": 0}
            for j in range(self.n_outputs)
        }
        sums = {
            (j, s): []
            for j in range(self.n_outputs)
            for s in (CERTIFIED, UNKNOWN, FALSIFIED)
        }
        for r in self.records:
            sums[(r.j, r.status)].append(r.box.volume())
            if r.status == FALSIFIED:
                out[r.j]["counterexamples"] += 1
        for (j, s), vols in sums.items():
            out[j][s] = math.fsum(vols)
        return out

    def validate(self) -> bool:
        """Check that each output's terminal boxes account for the domain."""
        dom_vol = self.domain.volume()
        per = self.per_output()
        for j, acc in per.items():
            covered = acc[CERTIFIED] + acc[UNKNOWN] + acc[FALSIFIED]
            slack = 1e-9 * max(dom_vol, 1e-300)
            if abs(covered - dom_vol) > slack:
                raise ValueError(
                    f"output {j}: terminal volume {covered} vs domain {dom_vol}"
                )
        return True

    def signature(self) -> tuple:
        """Schedule-independent content; equal across runs that only differ
        in worker count or timing."""
        return (
            tuple(float(v) for v in self.domain.lo),
            tuple(float(v) for v in self.domain.hi),
            self.epsilon,
            self.n_outputs,
            self.records,
            self.boxes_checked,
            self.splits,
            self.early_stopped,
            self.seed,
            self.split_log,
        )

    def to_dict(self) -> dict:
        per = self.per_output()
        return {
            "domain": {
                "lo": [float(v) for v in self.domain.lo],
                "hi": [float(v) for v in self.domain.hi],
            },
            "epsilon": self.epsilon,
            "certified_fraction": self.certified_fraction,
            "boxes_checked": self.boxes_checked,
            "splits": self.splits,
            "wall_time": self.wall_time,
            "early_stopped": self.early_stopped,
            "seed": self.seed,
            "workers": self.workers,
            "counterexamples": [
                {"point": list(r.witness), "output": r.j, "error": r.error}
                for r in self.records
                if r.status == FALSIFIED
            ],
            "unknown_boxes": sum(1 for r in self.records if r.status == UNKNOWN),
            "records": len(self.records),
            "per_output": {
                str(j): {
                    "certified_volume": acc[CERTIFIED],
                    "unknown_volume": acc[UNKNOWN],
                    "falsified_volume": acc[FALSIFIED],
                    "counterexamples": acc["counterexamples"],
                }
                for j, acc in per.items()
            },
        }


# ----------------------------------------------------------------------
# the driver


def _task_seed(global_seed: int, box: Hyperrectangle, j: int) -> int:
    """Stable per-task seed, independent of scheduling order."""
    h = hashlib.sha256()
    h.update(int(global_seed).to_bytes(8, "little", signed=True))
    h.update(int(j).to_bytes(4, "little"))
    h.update(box.key())
    return int.from_bytes(h.digest()[:8], "little")


def _process_task(ref, net, task, cfg, minw):
    try:
        verdict = check_box(
            ref, net, task,
            k_samples=cfg.k_samples, min_width=minw, tight=cfg.tight,
        )
    except (NoAdmissibleAxisError, EnclosureUnavailableError) as exc:
        return ("unknown", f"{type(exc).__name__}: {exc}")
    return ("verdict", verdict)


def _worker_main(ref, net, cfg, minw, task_q, result_q):
    while True:
        msg = task_q.get()
        if msg is None:
            return
        item_id, task = msg
        try:
            out = _process_task(ref, net, task, cfg, minw)
        except BaseException:
            result_q.put((item_id, "panic", traceback.format_exc()))
            continue
        result_q.put((item_id, out[0], out[1]))


class _Frontier:
    """Pending work: a LIFO stack, or a score*volume priority queue in
    early-stop mode (larger expected violation first)."""

    def __init__(self, prioritized: bool):
        self.prioritized = prioritized
        self._stack = []
        self._heap = []
        self._counter = itertools.count()

    def push(self, item: WorkItem):
        if self.prioritized:
            weight = item.score * item.task.box.volume()
            heapq.heappush(self._heap, (-weight, next(self._counter), item))
        else:
            self._stack.append(item)

    def pop(self) -> WorkItem:
        if self.prioritized:
            return heapq.heappop(self._heap)[2]
        return self._stack.pop()

    def __len__(self):
        return len(self._heap) if self.prioritized else len(self._stack)

    def drain(self):
        while len(self):
            yield self.pop()


def verify_domain(ref, net: Network, domain: Hyperrectangle, epsilon: float,
                  config: PartitionConfig | None = None) -> CoverageReport:
    """Resolve every (initial box, output) task over the domain.

    Returns a report whose terminal boxes tile the domain per output.  With
    stop_on_first_counterexample the run ends at the first confirmed
    violation and everything still pending is recorded as unknown; the
    report is then flagged early_stopped.
    """
    cfg = config if config is not None else PartitionConfig()
    if cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    if cfg.max_depth < 0:
        raise ConfigError(f"max_depth must be >= 0, got {cfg.max_depth}")
    if cfg.time_budget is not None and cfg.time_budget <= 0:
        raise ConfigError("time_budget must be positive or None")
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    if ref.n != domain.n:
        raise ConfigError(f"domain dim {domain.n} vs reference n={ref.n}")
    if net.n != ref.n or net.m != ref.m:
        raise ConfigError(
            f"network {net.n}->{net.m} vs reference {ref.n}->{ref.m}"
        )

    minw = _resolve_min_width(domain, cfg.min_width)
    t0 = time.monotonic()
    grid_boxes = initial_partition(domain, cfg.grid)

    frontier = _Frontier(prioritized=cfg.stop_on_first_counterexample)
    next_id = itertools.count()
    # reversed push order so the plain stack pops box 0, output 0 first
    roots = [
        (box, j) for box in grid_boxes for j in range(ref.m)
    ]
    for box, j in reversed(roots):
        task = VerificationTask(
            box=box, j=j, epsilon=float(epsilon), depth=0,
            seed=_task_seed(cfg.seed, box, j),
        )
        frontier.push(WorkItem(task=task, parent=None))

    records = []
    split_log = []
    boxes_checked = 0
    splits = 0
    early_stopped = False

    def out_of_time() -> bool:
        return (
            cfg.time_budget is not None
            and time.monotonic() - t0 > cfg.time_budget
        )

    def handle(item: WorkItem, kind: str, payload) -> bool:
        """Apply one task result; returns True when the run should stop."""
        nonlocal splits
        task = item.task
        if kind == "unknown":
            records.append(TerminalRecord(task.box, task.j, UNKNOWN))
            return False
        verdict = payload
        if isinstance(verdict, Certified):
            records.append(TerminalRecord(task.box, task.j, CERTIFIED))
            return False
        if isinstance(verdict, Falsified):
            records.append(
                TerminalRecord(
                    task.box, task.j, FALSIFIED,
                    witness=tuple(float(v) for v in verdict.point),
                    error=float(verdict.error),
                )
            )
            return cfg.stop_on_first_counterexample
        assert isinstance(verdict, Split)
        if task.depth >= cfg.max_depth:
            records.append(TerminalRecord(task.box, task.j, UNKNOWN))
            return False
        splits += 1
        if cfg.trace_splits:
            split_log.append((task.j, task.depth, verdict.axis, verdict.reason))
        parent_id = next(next_id)
        for child in task.box.split(verdict.axis):
            child_task = VerificationTask(
                box=child, j=task.j, epsilon=task.epsilon,
                depth=task.depth + 1,
                seed=_task_seed(cfg.seed, child, task.j),
            )
            frontier.push(
                WorkItem(task=child_task, parent=parent_id, score=verdict.score)
            )
        return False

    if cfg.workers == 1:
        while len(frontier):
            if out_of_time():
                early_stopped = True
                break
            item = frontier.pop()
            kind, payload = _process_task(ref, net, item.task, cfg, minw)
            boxes_checked += 1
            if handle(item, kind, payload):
                early_stopped = True
                break
    else:
        ctx = multiprocessing.get_context(
            "fork" if "fork" in multiprocessing.get_all_start_methods()
            else "spawn"
        )
        task_q = ctx.Queue()
        result_q = ctx.Queue()
        procs = [
            ctx.Process(
                target=_worker_main,
                args=(ref, net, cfg, minw, task_q, result_q),
                daemon=True,
            )
            for _ in range(cfg.workers)
        ]
        for p in procs:
            p.start()
        in_flight: dict = {}
        failure = None
        try:
            stop = False
            while (len(frontier) or in_flight) and failure is None:
                while len(frontier) and len(in_flight) < cfg.workers and not stop:
                    item = frontier.pop()
                    item_id = next(next_id)
                    in_flight[item_id] = item
                    task_q.put((item_id, item.task))
                if not in_flight:
                    break
                try:
                    item_id, kind, payload = result_q.get(timeout=600.0)
                except queue_mod.Empty:
                    failure = WorkerError(
                        "no worker produced a result within 600 s"
                    )
                    break
                item = in_flight.pop(item_id)
                if kind == "panic":
                    failure = WorkerError(
                        f"worker failed on box {item.task.box!r} output "
                        f"{item.task.j}:\n{payload}"
                    )
                    break
                boxes_checked += 1
                if handle(item, kind, payload):
                    stop = True
                if stop and not in_flight:
                    early_stopped = True
                    break
                if out_of_time() and not stop:
                    stop = True
                if stop and not in_flight:
                    early_stopped = True
                    break
        finally:
            for _ in procs:
                task_q.put(None)
            for p in procs:
                p.join(timeout=10.0)
                if p.is_alive():
                    p.terminate()
        if failure is not None:
            raise failure
        if early_stopped:
            for leftover in in_flight.values():
                frontier.push(leftover)

    if early_stopped:
        for item in frontier.drain():
            records.append(TerminalRecord(item.task.box, item.task.j, UNKNOWN))

    records.sort(key=TerminalRecord.sort_key)
    return CoverageReport(
        domain=domain,
        epsilon=float(epsilon),
        n_outputs=ref.m,
        records=tuple(records),
        boxes_checked=boxes_checked,
        splits=splits,
        wall_time=time.monotonic() - t0,
        early_stopped=early_stopped,
        seed=cfg.seed,
        workers=cfg.workers,
        split_log=tuple(sorted(split_log)),
    )


# ----------------------------------------------------------------------
# region files


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in v)


def export_regions(report: CoverageReport, path) -> None:
    """Write every terminal box with its status to a text file.

    Floats are written with repr, which round-trips exactly, so reloading
    reproduces the report's volume accounting bit for bit.
    """
    lines = [
        f"{_REGION_MAGIC} n={report.domain.n} outputs={report.n_outputs} "
        f"epsilon={report.epsilon!r}",
        f"# domain {_fmt_vec(report.domain.lo)} {_fmt_vec(report.domain.hi)}",
    ]
    for r in report.records:
        parts = [r.status, str(r.j), _fmt_vec(r.box.lo), _fmt_vec(r.box.hi)]
        if r.status == FALSIFIED:
            parts.append("witness " + _fmt_vec(r.witness))
            parts.append(f"error {r.error!r}")
        lines.append(" ".join(parts))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_regions(path):
    """Read a region file back; returns (records, meta).

    meta holds n, outputs, epsilon, and the domain box.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith(_REGION_MAGIC):
        raise ParseError(f"{path}: not a region file")
    header = dict(
        kv.split("=", 1) for kv in lines[0][len(_REGION_MAGIC):].split()
    )
    try:
        n = int(header["n"])
        outputs = int(header["outputs"])
        epsilon = float(header["epsilon"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad header: {exc}") from exc
    domain = None
    records = []
    for ln_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        toks = line.split()
        if toks[0] == "#":
            if len(toks) >= 2 and toks[1] == "domain":
                vals = [float(t) for t in toks[2:]]
                if len(vals) != 2 * n:
                    raise ParseError(f"{path}:{ln_no}: bad domain line")
                domain = Hyperrectangle.from_bounds(vals[:n], vals[n:])
            continue
        status = toks[0]
        if status not in (CERTIFIED, FALSIFIED, UNKNOWN):
            raise ParseError(f"{path}:{ln_no}: unknown status {status!r}")
        try:
            j = int(toks[1])
            if not 0 <= j < outputs:
                raise ValueError(f"output index {j} outside 0..{outputs - 1}")
            lo = [float(t) for t in toks[2:2 + n]]
            hi = [float(t) for t in toks[2 + n:2 + 2 * n]]
            rest = toks[2 + 2 * n:]
            witness = None
            error = None
            if status == FALSIFIED:
                if rest[0] != "witness" or rest[n + 1] != "error":
                    raise ValueError("malformed falsified record")
                witness = tuple(float(t) for t in rest[1:n + 1])
                error = float(rest[n + 2])
        except (IndexError, ValueError) as exc:
            raise ParseError(f"{path}:{ln_no}: {exc}") from exc
        records.append(
            TerminalRecord(
                Hyperrectangle.from_bounds(lo, hi), j, status,
                witness=witness, error=error,
            )
        )
    meta = {"n": n, "outputs": outputs, "epsilon": epsilon, "domain": domain}
    return records, meta
