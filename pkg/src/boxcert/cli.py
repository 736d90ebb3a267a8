"""Command line entry point.

Subcommands:
  verify     run one domain-wide verification and report coverage
  sweep      bisect for the smallest fully certifiable epsilon
  plot-data  turn a region file into plot-ready columns
  export     run a verification and write the region file

Exit codes for verify/export: 0 when the domain is fully certified, 2 when
at least one confirmed counterexample exists, 3 when the only obstruction
is unknown volume, 1 for configuration or file errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .dynamics import get_system, load_system
from .dynamics.benchmarks import quadratic_step_map
from .errors import BoxcertError, ConfigError
from .geometry import Hyperrectangle
from .network import Network, chain, load_weights
from .partitioner import (
    CERTIFIED,
    FALSIFIED,
    PartitionConfig,
    export_regions,
    load_regions,
    verify_domain,
)
from .verifier import AnalyticRef, NetworkRef

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COUNTEREXAMPLE = 2
EXIT_UNKNOWN = 3


def exit_code_for(report) -> int:
    """Pure mapping from a coverage report to the process exit code."""
    if report.certified_fraction == 1.0:
        return EXIT_OK
    if any(r.status == FALSIFIED for r in report.records):
        return EXIT_COUNTEREXAMPLE
    return EXIT_UNKNOWN


def _parse_grid(text):
    if text is None:
        return None
    parts = [p for p in text.split(",") if p]
    if len(parts) == 1:
        return int(parts[0])
    return [int(p) for p in parts]


def _parse_domain(text) -> Hyperrectangle:
    """Domain flag format: one lo:hi pair per axis, comma separated."""
    pairs = [p for p in text.split(",") if p]
    lo, hi = [], []
    for p in pairs:
        try:
            a, b = p.split(":")
            lo.append(float(a))
            hi.append(float(b))
        except ValueError as exc:
            raise ConfigError(
                f"bad domain component {p!r}; expected lo:hi"
            ) from exc
    return Hyperrectangle.from_bounds(lo, hi)


def _add_run_flags(p: argparse.ArgumentParser, need_epsilon: bool) -> None:
    p.add_argument("--system", help="builtin system name")
    p.add_argument("--config", help="system definition file (JSON)")
    p.add_argument("--weights", help="network weight file to verify")
    p.add_argument(
        "--teacher-weights",
        help="weight file of a reference network (verify student against it)",
    )
    p.add_argument(
        "--koopman",
        help="koopman metadata file; verifies the trajectory model per step",
    )
    p.add_argument(
        "--steps",
        help="comma separated step numbers for --koopman (default: all)",
    )
    if need_epsilon:
        p.add_argument("--epsilon", type=float,
                       help="closeness bound (default: the system's)")
    p.add_argument("--domain",
                   help="override domain, lo:hi per axis, comma separated")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grid", help="initial grid: one count, or one per axis")
    p.add_argument("--min-width", type=float, default=None,
                   help="width floor as an absolute value applied to all axes")
    p.add_argument("--max-depth", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-samples", type=int, default=8)
    p.add_argument("--early-stop", action="store_true",
                   help="stop at the first confirmed counterexample")
    p.add_argument("--tight-bounds", action="store_true",
                   help="recursive backward bounds for hidden layers")
    p.add_argument("--time-budget", type=float, default=None,
                   help="seconds before the run is cut off (marked partial)")
    p.add_argument("--report", help="write a JSON report here")
    p.add_argument("--regions", help="write the region file here")
    p.add_argument("--quiet", action="store_true")


def _partition_config(args) -> PartitionConfig:
    return PartitionConfig(
        workers=args.workers,
        grid=_parse_grid(args.grid),
        min_width=args.min_width,
        max_depth=args.max_depth,
        seed=args.seed,
        k_samples=args.k_samples,
        tight=args.tight_bounds,
        stop_on_first_counterexample=args.early_stop,
        time_budget=args.time_budget,
    )


def _load_reference(args):
    """Build (reference, network, domain, epsilon, label) from flags."""
    if args.teacher_weights:
        if not args.weights:
            raise ConfigError("--teacher-weights needs --weights for the student")
        if not args.domain:
            raise ConfigError("--teacher-weights needs an explicit --domain")
        teacher = load_weights(args.teacher_weights)
        net = load_weights(args.weights)
        domain = _parse_domain(args.domain)
        eps = getattr(args, "epsilon", None)
        if eps is None:
            raise ConfigError("--teacher-weights needs an explicit --epsilon")
        return (
            NetworkRef(teacher, tight=args.tight_bounds),
            net, domain, eps, "teacher-vs-student",
        )
    if args.system and args.config:
        raise ConfigError("give either --system or --config, not both")
    if not (args.system or args.config):
        raise ConfigError("one of --system, --config, --koopman, "
                          "--teacher-weights is required")
    system = get_system(args.system) if args.system else load_system(args.config)
    if not args.weights:
        raise ConfigError("--weights is required")
    net = load_weights(args.weights)
    domain = _parse_domain(args.domain) if args.domain else system.domain
    eps = getattr(args, "epsilon", None)
    if eps is None:
        eps = system.default_epsilon
    if eps is None:
        raise ConfigError(f"{system.name} has no default epsilon; pass --epsilon")
    return AnalyticRef(system), net, domain, eps, system.name


def _print_table(rows, out=None) -> None:
    out = out if out is not None else sys.stdout
    headers = ["target", "epsilon", "certified%", "boxes", "splits",
               "cex", "unknown", "time(s)"]
    widths = [max(len(h), max((len(str(r[i])) for r in rows), default=0))
              for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    print(line, file=out)
    print("-" * len(line), file=out)
    for r in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(r, widths)), file=out)


def _report_row(label, report):
    per = report.per_output()
    unknown = sum(1 for r in report.records if r.status == "unknown")
    cex = sum(acc["counterexamples"] for acc in per.values())
    return [
        label,
        f"{report.epsilon:g}",
        f"{100.0 * report.certified_fraction:.2f}",
        report.boxes_checked,
        report.splits,
        cex,
        unknown,
        f"{report.wall_time:.2f}",
    ]


def _emit(report, label, args) -> None:
    if not args.quiet:
        _print_table([_report_row(label, report)])
        for x, j, err in report.counterexamples[:20]:
            point = ", ".join(f"{v:.6g}" for v in x)
            print(f"counterexample: output {j} at ({point}) error {err:.6g}")
        extra = len(report.counterexamples) - 20
        if extra > 0:
            print(f"... and {extra} more counterexamples")
        if report.early_stopped:
            print("note: run stopped early; unprocessed boxes are unknown")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    if args.regions:
        export_regions(report, args.regions)


# ----------------------------------------------------------------------
# koopman trajectory models


def load_koopman(meta_path):
    """Read koopman metadata and the three component networks.

    Returns (encoder, k_net, decoder, meta dict).  Weight paths in the
    metadata resolve relative to the metadata file's directory.
    """
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != "boxcert-koopman":
        raise ConfigError(f"{meta_path}: not a koopman metadata file")
    base = os.path.dirname(os.path.abspath(meta_path))

    def _load(key):
        return load_weights(os.path.join(base, meta[key]))

    return _load("encoder"), _load("k_matrix"), _load("decoder"), meta


def koopman_step_network(encoder: Network, k_net: Network, decoder: Network,
                         t: int) -> Network:
    """The network predicting the state after t steps: decoder . K^t . encoder."""
    parts = [encoder] + [k_net] * t + [decoder]
    return chain(*parts)


def _run_koopman(args) -> int:
    encoder, k_net, decoder, meta = load_koopman(args.koopman)
    horizon = int(meta["horizon"])
    dt = float(meta["dt"])
    mu = float(meta["mu"])
    lam = float(meta["lambda"])
    dom = meta.get("domain")
    if args.domain:
        domain = _parse_domain(args.domain)
    elif dom is not None:
        try:
            domain = Hyperrectangle.from_bounds(
                [b[0] for b in dom], [b[1] for b in dom]
            )
        except (TypeError, ValueError, IndexError, KeyError) as exc:
            raise ConfigError(
                "koopman metadata domain must be a list of [lo, hi] pairs"
            ) from exc
    else:
        raise ConfigError("koopman metadata lacks a domain; pass --domain")
    eps = getattr(args, "epsilon", None)
    if eps is None:
        eps = float(meta.get("epsilon", 0.1))
    if args.steps:
        steps = sorted({int(s) for s in args.steps.split(",") if s})
        bad = [s for s in steps if not 1 <= s <= horizon]
        if bad:
            raise ConfigError(f"steps outside 1..{horizon}: {bad}")
    else:
        steps = list(range(1, horizon + 1))

    cfg = _partition_config(args)
    rows = []
    reports = {}
    any_cex = False
    any_gap = False
    for t in steps:
        net = koopman_step_network(encoder, k_net, decoder, t)
        ref = AnalyticRef(quadratic_step_map(t, dt=dt, mu=mu, lam=lam))
        report = verify_domain(ref, net, domain, eps, cfg)
        reports[t] = report
        rows.append(_report_row(f"step {t}", report))
        code = exit_code_for(report)
        any_cex = any_cex or code == EXIT_COUNTEREXAMPLE
        any_gap = any_gap or code == EXIT_UNKNOWN
        if args.regions:
            export_regions(report, f"{args.regions}.step{t}")
    if not args.quiet:
        _print_table(rows)
        total_cex = sum(len(r.counterexamples) for r in reports.values())
        if total_cex:
            print(f"{total_cex} counterexamples across all steps")
    if args.report:
        doc = {
            "kind": "koopman",
            "epsilon": eps,
            "horizon": horizon,
            "steps": {str(t): r.to_dict() for t, r in reports.items()},
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    if any_cex:
        return EXIT_COUNTEREXAMPLE
    return EXIT_UNKNOWN if any_gap else EXIT_OK


# ----------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    if args.koopman:
        return _run_koopman(args)
    ref, net, domain, eps, label = _load_reference(args)
    cfg = _partition_config(args)
    report = verify_domain(ref, net, domain, eps, cfg)
    _emit(report, label, args)
    return exit_code_for(report)


def cmd_export(args) -> int:
    if not args.regions:
        raise ConfigError("export needs --regions PATH")
    return cmd_verify(args)


def cmd_sweep(args) -> int:
    if args.koopman:
        raise ConfigError("sweep does not support koopman mode")
    ref, net, domain, _eps, label = _load_reference(args)
    cfg = _partition_config(args)
    if args.probe_budget is not None:
        cfg.time_budget = args.probe_budget
    lo, hi = args.epsilon_lo, args.epsilon_hi
    if not (0 < lo < hi):
        raise ConfigError(f"need 0 < epsilon-lo < epsilon-hi, got {lo}, {hi}")
    tol = args.tolerance
    if tol <= 0:
        raise ConfigError("tolerance must be positive")

    probes = []

    def certified_at(eps: float) -> bool:
        report = verify_domain(ref, net, domain, eps, cfg)
        ok = report.certified_fraction == 1.0 and not report.early_stopped
        probes.append((eps, ok, report.wall_time))
        if not args.quiet:
            state = "certified" if ok else "not certified"
            print(f"probe epsilon={eps:.6g}: {state} "
                  f"({report.wall_time:.2f}s)")
        return ok

    if not certified_at(hi):
        print(f"error: epsilon-hi {hi} is not certifiable; "
              "widen the bracket or raise the budget", file=sys.stderr)
        return EXIT_USAGE
    if certified_at(lo):
        best, worst_failed = lo, None
    else:
        best, worst_failed = hi, lo
        while hi - lo > tol * lo:
            mid = 0.5 * (lo + hi)
            if certified_at(mid):
                hi = mid
                best = mid
            else:
                lo = mid
                worst_failed = mid
    if not args.quiet:
        print(f"\nsmallest certified epsilon: {best:.6g}")
        if worst_failed is not None:
            print(f"largest uncertified probe:  {worst_failed:.6g}")
    if args.report:
        doc = {
            "kind": "sweep",
            "target": label,
            "smallest_certified_epsilon": best,
            "largest_uncertified_probe": worst_failed,
            "relative_tolerance": tol,
            "probes": [
                {"epsilon": e, "certified": ok, "wall_time": w}
                for e, ok, w in probes
            ],
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    records, meta = load_regions(args.regions_file)
    n = meta["n"]
    if n > 2:
        print(
            f"error: partition plots need n <= 2, this file has n={n}; "
            "verify a 2D slice (fix the other axes via --domain) and plot that",
            file=sys.stderr,
        )
        return EXIT_USAGE
    lines = []
    for r in records:
        lo = " ".join(repr(float(v)) for v in r.box.lo)
        hi = " ".join(repr(float(v)) for v in r.box.hi)
        lines.append(f"{r.status} {lo} {hi} {r.j}")
        if r.witness is not None:
            w = " ".join(repr(float(v)) for v in r.witness)
            lines.append(f"witness {w} {w} {r.j}")
    text = "\n".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + ("\n" if text else ""))
    else:
        if text:
            print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="boxcert",
        description="Certify that a network stays epsilon-close to a "
                    "reference map over a box domain.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run one verification")
    _add_run_flags(pv, need_epsilon=True)
    pv.set_defaults(func=cmd_verify)

    pe = sub.add_parser("export", help="run a verification and write regions")
    _add_run_flags(pe, need_epsilon=True)
    pe.set_defaults(func=cmd_export)

    ps = sub.add_parser("sweep", help="find the smallest certifiable epsilon")
    _add_run_flags(ps, need_epsilon=False)
    ps.add_argument("--epsilon-lo", type=float, required=True)
    ps.add_argument("--epsilon-hi", type=float, required=True)
    ps.add_argument("--tolerance", type=float, default=0.05,
                    help="relative convergence tolerance (default 0.05)")
    ps.add_argument("--probe-budget", type=float, default=None,
                    help="time budget per probe run, seconds")
    ps.set_defaults(func=cmd_sweep)

    pp = sub.add_parser("plot-data",
                        help="convert a region file to plot columns")
    pp.add_argument("regions_file")
    pp.add_argument("--out", help="output path (default: stdout)")
    pp.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BoxcertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
