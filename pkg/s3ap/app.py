"""
Command-line entry point of the s3ap toolkit.

Exit codes: 0 success, 1 usage (bad flags, missing files, unknown task or
environment, invalid config), 2 pipeline (validation issues, failed parses,
missed thresholds), 3 backend.
"""

import argparse
import logging
import logging.config
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from s3ap.commands import (
    init_bench_command,
    init_episode_command,
    init_foresee_command,
    init_gen_command,
    init_parse_command,
    init_rollout_command,
    init_simulate_command,
    init_validate_command,
)
from s3ap.config import VERSION, ConfigError, load_settings
from s3ap.core import InvalidValueError, S3apError
from s3ap.core.belief_oracle import InfeasibleParamsError, InvalidEventError
from s3ap.core.benchmark import DatasetFormatError
from s3ap.core.file_handling import FileHandlerError
from s3ap.core.llm_backend import BackendError, ScriptExhaustedError
from s3ap.core.toy_environments import EnvironmentDefinitionError
from s3ap.project import COMMAND_STORE, EXIT_BACKEND, EXIT_PIPELINE, EXIT_USAGE, UsageError, userguide_path

logger = logging.getLogger(__name__)

USAGE_ERRORS = (
    UsageError,
    ConfigError,
    FileHandlerError,
    DatasetFormatError,
    EnvironmentDefinitionError,
    InfeasibleParamsError,
    InvalidEventError,
    InvalidValueError,
)
BACKEND_ERRORS = (BackendError, ScriptExhaustedError)


def load_logging_config(verbose: bool = False):
    """Load the logging configuration from the YAML file."""
    try:
        base_dir = Path(__file__).resolve().parent
        log_file = base_dir / "logging.yml"
        with open(log_file, "r", encoding="utf-8") as f:
            config = yaml.safe_load(f)
            logging.config.dictConfig(config)
    except (ValueError, OSError, yaml.YAMLError) as e:
        logger.warning(f"Failed to load logging configuration: {e} --- Using basic config.")
        logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO)  # Fallback to basic config
    if verbose:
        for name in ("", "s3ap.core"):
            for handler in logging.getLogger(name).handlers:
                handler.setLevel(logging.DEBUG)


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose errors become UsageError instead of exiting with 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="s3ap",
        description="Structured social world states: parse, simulate, predict and evaluate.",
        epilog=f"User guide: {userguide_path()}",
    )
    parser.add_argument("--version", action="version", version=f"s3ap {VERSION}")
    parser.add_argument("--config", help="YAML config file (default: $S3AP_CONFIG).")
    parser.add_argument("--live", action="store_true", help="Allow calls to hosted model backends.")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)

    init_parse_command(subparsers)
    init_validate_command(subparsers)
    init_simulate_command(subparsers)
    init_rollout_command(subparsers)
    init_foresee_command(subparsers)
    init_episode_command(subparsers)
    init_gen_command(subparsers)
    init_bench_command(subparsers)
    return parser


def launch_application(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE

    load_logging_config(args.verbose)
    try:
        settings = load_settings(args.config)
        return COMMAND_STORE[args.command](args, settings)
    except USAGE_ERRORS as e:
        logger.error(e)
        return EXIT_USAGE
    except BACKEND_ERRORS as e:
        logger.error(e)
        return EXIT_BACKEND
    except S3apError as e:
        logger.error(e)
        return EXIT_PIPELINE


def main():
    sys.exit(launch_application())


if __name__ == "__main__":
    main()
