"""
commands/validate.py
Validate a trajectory document and list its issues.
"""

import argparse
import logging

from s3ap.config import Settings
from s3ap.core.file_handling import FileHandler
from s3ap.core.step_schema import decode_trajectory
from s3ap.project import EXIT_OK, EXIT_PIPELINE, register_command, require_file

logger = logging.getLogger(__name__)


def cmd_validate(args: argparse.Namespace, settings: Settings) -> int:
    text = FileHandler.read_text(require_file(args.input))
    traj, issues = decode_trajectory(text)
    if issues:
        for issue in issues:
            print(f"{issue.path} [{issue.code.value}] {issue.message}")
        logger.error(f"{args.input}: {len(issues)} issue(s)")
        return EXIT_PIPELINE
    print(f"valid: {len(traj)} step(s), agents: {', '.join(traj.agents)}")
    return EXIT_OK


def init_validate_command(subparsers) -> None:
    parser = register_command(subparsers, "validate", cmd_validate, "Validate a trajectory file.")
    parser.add_argument("--input", required=True, help="Trajectory JSON file.")
