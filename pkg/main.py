#!/usr/bin/env python3
"""
This module serves as the entry point for the ngdSim application.
It parses the command line and hands the scenarios to the ScenarioRunner.
"""

import argparse
import sys

from config_manager import ConfigManager
from errors import ExpectationFailed, NgdError
from output_manager import OutputManager
from scenario_manager import ScenarioRunner, list_scenarios

EXIT_OK = 0
EXIT_EXPECTATION_FAILED = 1
EXIT_ERROR = 2


def _values(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}") from e


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ngdSim",
        description="Simulate negative-group-delay op-amp feedback circuits from scenario files.",
    )
    parser.add_argument(
        "--out-dir", default="results", help="Directory for CSV, SVG and JSON outputs"
    )
    parser.add_argument(
        "--tolerance-scale",
        type=float,
        default=1.0,
        help="Factor applied to every declared tolerance and upper bound",
    )
    parser.add_argument("--jobs", type=int, default=1, help="Scenarios to run concurrently")
    parser.add_argument("--verbose", action="store_true", help="Print debug messages")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run scenarios by built-in name or file path")
    run.add_argument("scenarios", nargs="+", metavar="scenario")

    commands.add_parser("list", help="List the built-in scenarios")

    sweep = commands.add_parser("sweep", help="Re-run a scenario over values of one parameter")
    sweep.add_argument("scenario")
    sweep.add_argument("--param", required=True, help="Dotted path, e.g. blocks.amp.dc_gain")
    sweep.add_argument("--values", required=True, type=_values, help="Comma-separated numbers")
    return parser


def main(argv=None):
    """Parse arguments, run the command and return the exit code."""
    args = build_parser().parse_args(argv)
    output_manager = OutputManager()
    if args.verbose:
        output_manager.debug_level = max(output_manager.debug_level, 1)

    try:
        if args.command == "list":
            for name, description in list_scenarios():
                output_manager.print(f"[bold]{name}[/bold]: {description}")
            return EXIT_OK

        runner = ScenarioRunner(args.out_dir, args.tolerance_scale, args.jobs)
        config_manager = ConfigManager()
        if args.command == "sweep":
            config = config_manager.load(args.scenario)
            rows = runner.sweep(config, args.param, args.values)
            columns = sorted({key for row in rows for key in row["metrics"]})
            output_manager.table(
                f"sweep {config.name} over {args.param}",
                [args.param] + columns,
                [
                    [f"{row['value']:.6g}"]
                    + [f"{row['metrics'].get(key, float('nan')):.6g}" for key in columns]
                    for row in rows
                ],
            )
            return EXIT_OK if all(row["passed"] for row in rows) else EXIT_EXPECTATION_FAILED

        configs = [config_manager.load(name) for name in args.scenarios]
        summaries = runner.run_many(configs)
        for summary in summaries:
            runner.print_summary(summary)
        for summary in summaries:
            summary.check()
        return EXIT_OK
    except ExpectationFailed as e:
        output_manager.error(str(e))
        return EXIT_EXPECTATION_FAILED
    except NgdError as e:
        output_manager.error(str(e))
        if output_manager.debug_level >= 2:
            output_manager.console.print_exception()
        return EXIT_ERROR


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nKeyboardInterrupt detected. Exiting gracefully.")
        sys.exit(EXIT_ERROR)
