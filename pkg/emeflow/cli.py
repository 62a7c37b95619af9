import argparse
import logging
import os
import sys
from pathlib import Path

from .constants import DEFAULT_OUTPUT_DIR, LOG_FILENAME, OUTPUT_DIR_ENV
from .errors import ScenarioValidationError, SimulationError
from .experiment import (
    emit_plot_data,
    read_profile,
    run_scenario,
    sample_detections,
    scenario_profile,
    write_detections,
)
from .scenario import BUILTIN_ALIASES, BUILTIN_SCENARIOS, Scenario, get_builtin, load_scenario
from .utils import build_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def resolve_output_dir(flag: str | None) -> Path:
    """--output-dir, else $EMEFLOW_OUTPUT_DIR, else ./runs"""
    return Path(flag or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emeflow",
        description="Double-slit EME density and flow-line simulator",
    )
    parser.add_argument("--output-dir", type=str, default=None, help="Root directory for run outputs")
    parser.add_argument("--workers", type=int, default=os.cpu_count(), help="Threads for flow-line batches")
    parser.add_argument(
        "--log-level",
        type=str,
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level",
    )
    parser.add_argument("--no-progress", action="store_true", help="Disable progress bars")

    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a scenario file")
    run.add_argument("config", type=str, help="Path to a key = value scenario file")

    scenario = commands.add_parser("scenario", help="Run a built-in scenario")
    scenario.add_argument("name", type=str, help="Built-in scenario name")

    commands.add_parser("list-scenarios", help="List built-in scenarios")

    sample = commands.add_parser("sample", help="Sample detection events from a profile")
    sample.add_argument("--n", type=int, required=True, help="Number of detection events")
    source = sample.add_mutually_exclusive_group()
    source.add_argument("--scenario", type=str, default="flow-lines", help="Built-in scenario providing the profile")
    source.add_argument("--profile", type=str, default=None, help="Profile CSV with x_mm,U_norm columns")
    sample.add_argument("--seed", type=int, default=0, help="Random seed")
    return parser


def _run(scenario: Scenario, args) -> None:
    manifest = run_scenario(
        scenario,
        resolve_output_dir(args.output_dir),
        workers=args.workers,
        progress=not args.no_progress,
    )
    emit_plot_data(manifest)
    print(manifest.run_dir)


def _sample(args) -> None:
    if args.n < 1:
        raise ValueError(f"--n must be at least 1, got {args.n}")
    output_root = resolve_output_dir(args.output_dir)
    if args.profile is not None:
        x, u = read_profile(args.profile)
        run_dir = output_root / Path(args.profile).stem
    else:
        scenario = get_builtin(args.scenario)
        x, u = scenario_profile(scenario)
        run_dir = output_root / scenario.name
    run_dir.mkdir(parents=True, exist_ok=True)
    events = sample_detections(x, u, args.n, seed=args.seed)
    path = write_detections(run_dir / "detections.csv", events)
    logger.info(f"Wrote {args.n} detection events to {path}")
    print(path)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        aliases = {target: alias for alias, target in BUILTIN_ALIASES.items()}
        for name, scenario in BUILTIN_SCENARIOS.items():
            alias = f" (alias {aliases[name]})" if name in aliases else ""
            print(f"{name:24s} {scenario.description}{alias}")
        return EXIT_OK

    try:
        output_root = resolve_output_dir(args.output_dir)
        build_logger("emeflow", LOG_FILENAME, log_dir=output_root, level=getattr(logging, args.log_level))
        if args.command == "run":
            _run(load_scenario(args.config), args)
        elif args.command == "scenario":
            _run(get_builtin(args.name), args)
        elif args.command == "sample":
            _sample(args)
    except ScenarioValidationError as e:
        logger.error(str(e))
        return EXIT_VALIDATION
    except SimulationError as e:
        logger.error(f"Numerical failure: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        return EXIT_IO
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
