"""
AP Deployment Optimizer - Command-line entry point
Cell-free ISAC access-point placement: evaluate, train, oracle, compare, sweep
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from executor import Executor

EXIT_CODES = {None: 0, "internal": 1, "config": 2, "io": 3, "budget": 4, "data": 5}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML experiment document")
    common.add_argument("--seed", type=int, default=None, help="Override the config seed")
    common.add_argument("--out-dir", default="runs", help="Directory for manifest and results")
    common.add_argument("--objective", default=None,
                        choices=["max_sum", "max_min", "comm_only", "sensing_only", "weighted_sum"],
                        help="Override objective.kind")
    common.add_argument("--solver", default=None, choices=["sac", "cem", "random", "grid"],
                        help="Override solver.name (oracle and sweep)")
    common.add_argument("--no-timings", action="store_true",
                        help="Zero wall-clock fields so outputs are byte-identical across runs")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Warnings only, no progress bars")

    parser = argparse.ArgumentParser(
        description="Optimize transmitter/receiver AP placement for cell-free integrated sensing and communication"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    evaluate = sub.add_parser("evaluate", parents=[common], help="Score a deployment file")
    evaluate.add_argument("--deployment", required=True, help="JSON file with tx and rx coordinates")

    train = sub.add_parser("train", parents=[common], help="Train the SAC agent")
    train.add_argument("--trace", action="store_true", help="Write the per-step environment trace CSV")

    sub.add_parser("oracle", parents=[common], help="Run a baseline optimizer (grid by default)")
    sub.add_parser("compare", parents=[common], help="Run every solver on the same scenario")

    sweep = sub.add_parser("sweep", parents=[common], help="Sweep AP counts, objectives and/or seeds")
    sweep.add_argument("--workers", type=int, default=1, help="Worker processes for sweep cells")
    return parser


def build_command(args: argparse.Namespace) -> Dict[str, Any]:
    """Translate parsed arguments into an executor command"""
    params: Dict[str, Any] = {
        "config_path": args.config,
        "out_dir": args.out_dir,
        "seed": args.seed,
    }
    if args.no_timings:
        params["record_timing"] = False
    if args.command != "sweep":
        params["objective"] = args.objective
    if args.command in ("oracle", "sweep"):
        params["solver"] = args.solver
    if args.command == "evaluate":
        params["deployment_path"] = args.deployment
    if args.command == "train":
        params["trace"] = args.trace
    if args.command == "sweep":
        params["workers"] = args.workers
    return {"action": args.command, "parameters": params}


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s", stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    executor = Executor(out_dir=args.out_dir, progress=not args.quiet)
    result = executor.execute(build_command(args))
    if result["status"] != "success":
        print(f"error [{result['category']}]: {result['error_detail']}", file=sys.stderr)
        return EXIT_CODES[result["category"]]

    for name in result["outputs"]:
        print(f"{result['out_dir']}/{name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
