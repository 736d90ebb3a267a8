"""Command-line entry points: train, distill, koopman, gen-data."""

from __future__ import annotations

import argparse
import sys

from .koopman import KoopmanSpec, train_koopman
from .specs import TrainSpec
from .systems import builtin_names, domain_only, resolve_system
from .trajectories import generate_trajectories, load_trajectories, save_trajectories
from .training import TrainingDiverged, distill, train_abstraction
from .weights import import_network


def _widths(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _parse_domain(text: str):
    lo, hi = [], []
    for part in text.split(","):
        a, b = part.split(":")
        lo.append(float(a))
        hi.append(float(b))
    return lo, hi


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden", type=_widths, default=[12],
                   help="comma-separated hidden layer widths (default 12)")
    p.add_argument("--activation", choices=["relu", "leaky_relu"],
                   default="relu")
    p.add_argument("--slope", type=float, default=0.01,
                   help="negative-side slope for leaky_relu")
    p.add_argument("--iterations", type=int, default=50_000)
    p.add_argument("--batch-size", type=int, default=4096)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lambda-max", type=float, default=0.001,
                   help="weight on the batch-maximum error term")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=float, default=None,
                   help="stop once held-out max error drops below this")
    p.add_argument("--hard-fraction", type=float, default=0.25,
                   help="share of each batch drawn from the worst pool points")
    p.add_argument("--scale-outputs", action="store_true",
                   help="normalize each output during training; folded back "
                        "into the exported weights")
    p.add_argument("--focus-axis", type=int, default=None,
                   help="oversample near --focus-center along this axis")
    p.add_argument("--focus-fraction", type=float, default=0.35)
    p.add_argument("--focus-scale", type=float, default=0.05)
    p.add_argument("--focus-center", type=float, default=0.0)
    p.add_argument("--dtype", choices=["float32", "float64"],
                   default="float64")
    p.add_argument("--out", required=True, help="weight file to write")


def _spec_from_args(args, system) -> TrainSpec:
    return TrainSpec(
        system=system, hidden=args.hidden, activation=args.activation,
        slope=args.slope, lambda_max=args.lambda_max, lr=args.lr,
        iterations=args.iterations, batch_size=args.batch_size,
        seed=args.seed, export_path=args.out, target_max_err=args.target,
        hard_fraction=args.hard_fraction, scale_outputs=args.scale_outputs,
        focus_axis=args.focus_axis,
        focus_fraction=args.focus_fraction if args.focus_axis is not None else 0.0,
        focus_scale=args.focus_scale, focus_center=args.focus_center,
        dtype=args.dtype,
    )


def _run_train(args) -> int:
    system = resolve_system(args.system)
    result = train_abstraction(_spec_from_args(args, system))
    print(f"{system.name}: held-out mean {result.mean_err:.6f} "
          f"max {result.max_err:.6f} after {result.steps_run} iterations "
          f"-> {result.export_path}")
    return 0


def _run_distill(args) -> int:
    if args.domain:
        lo, hi = _parse_domain(args.domain)
        teacher = import_network(args.teacher)
        m = teacher[-1].out_features
        if teacher[0].in_features != len(lo):
            print(f"error: teacher expects {teacher[0].in_features} inputs, "
                  f"domain has {len(lo)}", file=sys.stderr)
            return 1
        system = domain_only("distilled", lo, hi, m)
    else:
        system = resolve_system(args.system)
    result = distill(args.teacher, _spec_from_args(args, system))
    print(f"student: held-out mean {result.mean_err:.6f} "
          f"max {result.max_err:.6f} vs teacher -> {result.export_path}")
    return 0


def _run_koopman(args) -> int:
    spec = KoopmanSpec(horizon=args.horizon, iterations=args.iterations,
                       batch_size=args.batch_size, lr=args.lr,
                       seed=args.seed, n_train=args.trajectories,
                       epsilon=args.epsilon, export_dir=args.out_dir)
    data = None
    if args.dataset:
        data, _dt = load_trajectories(args.dataset)
    result = train_koopman(spec, trajectories=data)
    print(f"koopman: validation MSE {result.val_mse:.6f}, worst eval-step "
          f"err {result.worst_step_err:.4f} -> {result.meta_path}")
    return 0


def _run_gen_data(args) -> int:
    system = resolve_system(args.system)
    batch = generate_trajectories(system, args.trajectories, args.steps,
                                  args.dt, seed=args.seed)
    if batch.failed:
        print(f"warning: dropped {len(batch.failed)} failed trajectories "
              f"(indices {batch.failed})", file=sys.stderr)
    kept = batch.ok
    if kept.shape[0] == 0:
        print("error: every trajectory failed to integrate", file=sys.stderr)
        return 1
    save_trajectories(args.out, kept, args.dt)
    print(f"{system.name}: wrote {kept.shape[0]} trajectories x "
          f"{args.steps} steps to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nabtrain",
        description="Train networks and generate datasets in the boxcert "
                    "file formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit an abstraction net to a system")
    p.add_argument("--system", required=True,
                   help=f"builtin ({', '.join(builtin_names())}) or a JSON "
                        "system description path")
    _add_train_args(p)
    p.set_defaults(func=_run_train)

    p = sub.add_parser("distill",
                       help="fit a student net to a saved teacher net")
    p.add_argument("--teacher", required=True, help="teacher weight file")
    p.add_argument("--system", help="system supplying the sampling domain")
    p.add_argument("--domain",
                   help="explicit lo:hi,lo:hi sampling box (alternative "
                        "to --system)")
    _add_train_args(p)
    p.set_defaults(func=_run_distill)

    p = sub.add_parser("koopman",
                       help="train the lifted linear-dynamics model on the "
                            "quadratic benchmark")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--iterations", type=int, default=20_000)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=31)
    p.add_argument("--trajectories", type=int, default=60_000,
                   help="training trajectories to roll out")
    p.add_argument("--epsilon", type=float, default=0.1,
                   help="closeness target recorded in the metadata")
    p.add_argument("--dataset",
                   help="use this trajectory file instead of rolling out "
                        "fresh data")
    p.set_defaults(func=_run_koopman)

    p = sub.add_parser("gen-data", help="integrate trajectories to a dataset")
    p.add_argument("--system", required=True)
    p.add_argument("--trajectories", type=int, default=128)
    p.add_argument("--steps", type=int, default=32)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_run_gen_data)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # argparse refuses option values that start with a dash, which domain
    # boxes with negative lower bounds always do; fold them into --flag=value
    for i, tok in enumerate(argv[:-1]):
        if tok == "--domain" and argv[i + 1].startswith("-"):
            argv[i:i + 2] = [f"--domain={argv[i + 1]}"]
            break
    args = build_parser().parse_args(argv)
    if args.command == "distill" and not (args.system or args.domain):
        print("error: distill needs --system or --domain", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 1
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
