"""Command-line front end.

Subcommands: trajectory, ensemble, sequence, fractions, sweep.  A JSON
config file supplies defaults; explicit flags override file values.  Exit
code 0 on success, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .runner import (
    ConfigError,
    ExperimentConfig,
    run_ensemble,
    run_sequence,
    run_sweep,
    run_trajectory,
    write_outputs,
)

_KIND_BY_COMMAND = {
    "trajectory": "trajectory",
    "ensemble": "ensemble",
    "fractions": "choice-fractions",
    "sequence": "sequence",
    "sweep": "sweep",
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--target", type=int, help="target photon number")
    sub.add_argument("--targets", help="comma-separated target sequence, e.g. 3,1,4,2,6,2,5")
    sub.add_argument("--trajectories", type=int, help="number of trajectories")
    sub.add_argument("--duration-ms", type=float, help="run duration in milliseconds")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--threshold", type=float, help="target-population threshold")
    sub.add_argument("--delay-depth", type=int, help="samples in flight before detection")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--workers", type=int, help="parallel trajectory workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fockloop",
        description="Photon-number feedback loop simulator: plant, Bayesian filter, controller.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for command, kind in _KIND_BY_COMMAND.items():
        sub = subs.add_parser(command, help=f"run a {kind} experiment")
        _add_common(sub)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    cfg = replace(cfg, kind=_KIND_BY_COMMAND[args.command])
    if args.target is not None:
        cfg = replace(cfg, target=args.target, targets=None)
    if args.targets is not None:
        try:
            targets = [int(x) for x in args.targets.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"targets: expected a comma-separated integer list ({exc})")
        cfg = replace(cfg, targets=targets)
    if args.trajectories is not None:
        cfg = replace(cfg, trajectories=args.trajectories)
    if args.duration_ms is not None:
        cfg = replace(cfg, duration_ms=args.duration_ms)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threshold is not None:
        cfg = replace(cfg, threshold=args.threshold)
    if args.delay_depth is not None:
        cfg = replace(cfg, physics=replace(cfg.physics, delay_depth=args.delay_depth))
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if cfg.kind == "trajectory":
            result = run_trajectory(cfg)
        elif cfg.kind == "sequence":
            result = run_sequence(cfg)
        elif cfg.kind == "sweep":
            result = run_sweep(cfg)
        else:
            result = run_ensemble(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = cfg.out_dir or "."
    written = write_outputs(cfg, result, out_dir)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
