"""
commands/parse.py
Parse a narrative file into a `.s3ap.json` trajectory.
"""

import argparse
import logging
from pathlib import Path

from s3ap.config import Settings
from s3ap.core.file_handling import FileHandler
from s3ap.core.narrative_parser import ParseFailedError, ParseTask, ParseTaskName, parse_narrative, reference_parse
from s3ap.core.step_schema import TRAJECTORY_SUFFIX, WireForm, write_trajectory
from s3ap.project import EXIT_OK, EXIT_PIPELINE, REFERENCE_BACKEND, UsageError, register_command, require_file, resolve_backend, live_enabled

logger = logging.getLogger(__name__)


def default_output(input_path: Path) -> Path:
    return input_path.with_name(input_path.stem + TRAJECTORY_SUFFIX)


def cmd_parse(args: argparse.Namespace, settings: Settings) -> int:
    input_path = require_file(args.input)
    try:
        task = ParseTask.named(args.task)
    except KeyError as e:
        raise UsageError(e.args[0])
    max_retries = settings.max_retries if args.max_retries is None else args.max_retries
    if max_retries < 0:
        raise UsageError("--max-retries must be >= 0")
    out = Path(args.out) if args.out else default_output(input_path)
    narrative = FileHandler.read_text(input_path)

    if args.backend == REFERENCE_BACKEND:
        traj = reference_parse(narrative)
        attempts = 1
    else:
        backend = resolve_backend(args.backend, settings, live_enabled(args))
        try:
            traj, tries = parse_narrative(narrative, task, backend, max_retries, WireForm(args.form))
        except ParseFailedError as e:
            dump = out.with_name(out.name.removesuffix(TRAJECTORY_SUFFIX) + ".attempts.json")
            FileHandler.write_json(dump, [attempt.to_dict() for attempt in e.attempts])
            logger.error(f"{e}; attempts written to {dump}")
            return EXIT_PIPELINE
        attempts = len(tries)

    write_trajectory(traj, out, WireForm(args.form))
    print(f"attempts: {attempts}")
    print(f"written: {out}")
    return EXIT_OK


def init_parse_command(subparsers) -> None:
    parser = register_command(subparsers, "parse", cmd_parse, "Parse a narrative into simulation steps.")
    parser.add_argument("--task", default=ParseTaskName.GENERIC.value, help="Parse task (perception rules).")
    parser.add_argument("--input", required=True, help="Narrative text file.")
    parser.add_argument(
        "--backend",
        default=REFERENCE_BACKEND,
        help="'reference' (template grammar), mock:<script.json> or a model profile.",
    )
    parser.add_argument("--max-retries", type=int, default=None, help="Retries after an invalid response.")
    parser.add_argument("--form", choices=[f.value for f in WireForm], default=WireForm.OBJECT_MAP.value)
    parser.add_argument("--out", help="Output trajectory file (default: <input>.s3ap.json).")
