"""Command-line interface: seeded experiment batches, log aggregation and
world-file generation.

Exit code 0 on success, 1 on runtime errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path as FilePath

from . import __version__
from .config import build_robot, build_sim_config, build_world_params, load_config
from .errors import RiskplanError
from .experiment import (
    ExperimentSpec,
    aggregate,
    discover_mission_logs,
    format_report,
    run_experiment,
    write_report,
)
from .sim import MODES
from .worldgen import (
    WORLD_PRESETS,
    WorldGenParams,
    generate_world,
    preset_params,
    save_world,
)


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(token) for token in raw.split(",") if token.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskplan",
        description="Risk-aware exploration planning experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded batch of missions")
    run.add_argument("--world", required=True,
                     help=f"world preset ({', '.join(sorted(WORLD_PRESETS))}) or .map file")
    run.add_argument("--seed", required=True, type=_parse_seeds,
                     help="comma-separated seed list, e.g. 1,2,3")
    run.add_argument("--mode", required=True, choices=[*MODES, "both"])
    run.add_argument("--duration", required=True, type=int, help="seconds")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--workers", type=int, default=1)

    agg = sub.add_parser("aggregate", help="aggregate mission CSVs into a report")
    agg.add_argument("--logs", required=True, help="directory of mission CSVs")
    agg.add_argument("--out", required=True, help="report output directory")

    gen = sub.add_parser("gen-world", help="generate a world file")
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--world", required=True,
                     help=f"preset name ({', '.join(sorted(WORLD_PRESETS))})")
    gen.add_argument("--out", required=True, help="target .map path")
    gen.add_argument("--config", help="key=value config file (world_* keys)")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    values = load_config(args.config) if args.config else {}
    robot = build_robot(values)
    base_world = (
        preset_params(args.world)
        if args.world in WORLD_PRESETS
        else WorldGenParams()
    )
    sim = build_sim_config(values, base_world)
    modes = MODES if args.mode == "both" else (args.mode,)
    spec = ExperimentSpec(
        world=args.world,
        seeds=args.seed,
        duration=args.duration,
        modes=modes,
        out_dir=FilePath(args.out),
        robot=robot,
        sim=sim,
        workers=args.workers,
    )
    report = run_experiment(spec)
    sys.stdout.write(format_report(report))
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    logs = discover_mission_logs(args.logs)
    if not logs:
        sys.stderr.write(f"riskplan: no mission CSVs found in {args.logs}\n")
        return 1
    report = aggregate(logs)
    write_report(report, args.out)
    sys.stdout.write(format_report(report))
    return 0


def _cmd_gen_world(args: argparse.Namespace) -> int:
    values = load_config(args.config) if args.config else {}
    params = build_world_params(values, preset_params(args.world))
    robot = build_robot(values)
    world = generate_world(args.seed, params, robot)
    save_world(world, args.out)
    sys.stdout.write(
        f"wrote {args.out} (seed {world.seed}, effective {world.effective_seed}, "
        f"start {tuple(world.start)})\n"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "aggregate": _cmd_aggregate,
        "gen-world": _cmd_gen_world,
    }
    try:
        return handlers[args.command](args)
    except (RiskplanError, OSError, KeyError, ValueError) as error:
        sys.stderr.write(f"riskplan: {error}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
