"""
Module for the `bdso-sim` command line interface: running scenarios over seed ranges and re-checking stored traces.
"""

import argparse
import json
import logging
import sys
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Optional

from bdso_simulator.checkers.registry import evaluate, resolve_properties
from bdso_simulator.core.config import SchedulerPolicy, config
from bdso_simulator.core.exceptions import (
    ConfigInvalidError,
    StepLimitExceededError,
    TraceCorruptError,
    UnknownPropertyError,
)
from bdso_simulator.core.logger_setup import setup_logger
from bdso_simulator.schemas.scenario import ScenarioConfig, load_scenario
from bdso_simulator.schemas.verdict import Verdict
from bdso_simulator.simnet.history import History
from bdso_simulator.simnet.simulator import run_scenario

logger = logging.getLogger()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def parse_seeds(value: str) -> range:
    """
    Parse a seed or an inclusive seed range written `A..B`.

    :param value: The command line value.
    :raises argparse.ArgumentTypeError: If the value is not a seed or a valid range.
    :return: The seeds.
    """
    first, separator, last = value.partition("..")
    try:
        start = int(first)
        stop = int(last) if separator else start
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"'{value}' is not a seed or a seed range A..B") from exc
    if start < 0 or stop < start:
        raise argparse.ArgumentTypeError(f"'{value}' is not a non-empty range of non-negative seeds")
    return range(start, stop + 1)


def parse_properties(value: str) -> list[str]:
    """
    Parse a comma separated list of property names.

    :param value: The command line value.
    :raises argparse.ArgumentTypeError: If a name is not a registered property.
    :return: The property names.
    """
    try:
        return resolve_properties(name.strip() for name in value.split(",") if name.strip())
    except UnknownPropertyError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def parse_bool(value: str) -> bool:
    """
    Parse a boolean flag value.

    :param value: The command line value.
    :raises argparse.ArgumentTypeError: If the value is not a boolean.
    :return: The boolean.
    """
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"'{value}' is not a boolean")


def print_verdicts(verdicts: list[Verdict], seed: Optional[int] = None) -> None:
    """Print one JSON line per verdict."""
    for verdict in verdicts:
        line = verdict.model_dump(mode="json")
        if seed is not None:
            line = {"seed": seed, **line}
        print(json.dumps(line))


class SubCommand(ABC):
    """Base class for a sub command"""

    def __init__(self, help: str):  # pylint: disable=redefined-builtin
        self.help = help

    @abstractmethod
    def setup(self, parser: argparse.ArgumentParser):
        """Setup the parser by adding any parameters here"""

    @abstractmethod
    def run(self, args: argparse.Namespace) -> int:
        """Run the command with the given parameters as added by 'setup' and return the exit status"""


class CommandRun(SubCommand):
    """Command that runs a scenario over a range of seeds

    - Writes one trace per seed to the output directory, including the partial trace of a run that hit the step limit
    - Prints the verdict of every requested property for every seed
    - Exits with 1 if any property fails or any run hits the step limit
    """

    def __init__(self):
        super().__init__(help="Run a scenario over a range of seeds and check its properties")

    def setup(self, parser: argparse.ArgumentParser):
        parser.add_argument("--config", required=True, help="Path of a scenario file or name of a bundled scenario")
        parser.add_argument("--seeds", type=parse_seeds, help="Seed or inclusive seed range A..B (default: the file's)")
        parser.add_argument("--out", type=Path, default=None, help="Directory traces are written to")
        parser.add_argument("--properties", type=parse_properties, help="Comma separated properties to check")
        parser.add_argument("--strict-bounds", type=parse_bool, default=None, help="Enforce the resilience bounds")
        parser.add_argument("--policy", type=SchedulerPolicy, choices=list(SchedulerPolicy), help="Scheduling policy")
        parser.add_argument("--step-limit", type=int, default=None, help="Steps after which a run is abandoned")
        parser.add_argument("--workers", type=int, default=None, help="Number of seeds run in parallel")

    def run(self, args: argparse.Namespace) -> int:
        try:
            scenario = load_scenario(args.config, args.strict_bounds)
        except ConfigInvalidError as exc:
            logger.error("%s", exc)
            return EXIT_INVALID

        seeds = args.seeds or range(scenario.seed, scenario.seed + 1)
        out_dir = args.out or config.runner.out_dir
        workers = args.workers or config.runner.workers
        job = partial(self.run_seed, scenario, args=args, out_dir=out_dir)
        try:
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as executor:
                    results = list(executor.map(job, seeds, chunksize=max(1, len(seeds) // (4 * workers))))
            else:
                results = [job(seed) for seed in seeds]
        except ConfigInvalidError as exc:
            logger.error("%s", exc)
            return EXIT_INVALID

        status = EXIT_OK
        for seed, verdicts, completed in results:
            print_verdicts(verdicts, seed)
            if not completed or any(verdict.failed for verdict in verdicts):
                status = EXIT_FAILED
        return status

    @staticmethod
    def run_seed(
        scenario: ScenarioConfig, seed: int, args: argparse.Namespace, out_dir: Path
    ) -> tuple[int, list[Verdict], bool]:
        """
        Run and check one seed.

        :param scenario: The validated scenario.
        :param seed: The seed.
        :param args: Parsed command line arguments.
        :param out_dir: Directory the trace is written to.
        :return: The seed, its verdicts and whether the run reached quiescence.
        """
        completed = True
        try:
            history = run_scenario(scenario, seed=seed, policy=args.policy, step_limit=args.step_limit)
        except StepLimitExceededError as exc:
            logger.error("%s", exc)
            history = exc.history
            completed = False
        history.write(out_dir / f"{scenario.name}-seed{seed}.jsonl")
        return seed, evaluate(history, args.properties), completed


class CommandCheck(SubCommand):
    """Command that re-runs the checkers on a stored trace"""

    def __init__(self):
        super().__init__(help="Check properties of a stored trace")

    def setup(self, parser: argparse.ArgumentParser):
        parser.add_argument("trace", type=Path, help="Path of the trace file")
        parser.add_argument("--properties", type=parse_properties, help="Comma separated properties to check")

    def run(self, args: argparse.Namespace) -> int:
        try:
            history = History.read(args.trace)
        except TraceCorruptError as exc:
            logger.error("%s", exc)
            return EXIT_INVALID

        verdicts = evaluate(history, args.properties)
        print_verdicts(verdicts)
        return EXIT_FAILED if any(verdict.failed for verdict in verdicts) else EXIT_OK


# List of subcommands
commands: dict[str, SubCommand] = {
    "run": CommandRun(),
    "check": CommandCheck(),
}


def main(argv: Optional[list[str]] = None):
    """Runs CLI commands"""
    parser = argparse.ArgumentParser(prog="bdso-sim", description="Simulate Byzantine-tolerant replicated objects")
    parser.add_argument(
        "--debug", action="store_true", help="Flag for setting the log level to debug to output more info"
    )

    subparser = parser.add_subparsers(dest="command", required=True)

    for command_name, command in commands.items():
        command_parser = subparser.add_parser(command_name, help=command.help)
        command.setup(command_parser)

    args = parser.parse_args(argv)

    setup_logger()
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    sys.exit(commands[args.command].run(args))


if __name__ == "__main__":
    main()
