"""
commands/foresee.py
Compare myopic and foresighted egos over a seeded environment suite.
"""

import argparse
import json
import logging
from pathlib import Path

from s3ap.config import Settings
from s3ap.core.file_handling import FileHandler
from s3ap.core.foresee_agent import compare_suite, summarize_comparison
from s3ap.project import EXIT_OK, EXIT_PIPELINE, UsageError, parse_seeds, print_json, register_command

logger = logging.getLogger(__name__)


def cmd_foresee(args: argparse.Namespace, settings: Settings) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    parallelism = args.parallelism or settings.parallelism
    seeds = parse_seeds(args.seeds)
    frame = compare_suite(args.env, seeds, args.n, parallelism)
    summary = {"env": args.env, "n": args.n, **summarize_comparison(frame)}
    print_json(summary)
    table = frame.to_markdown(index=False, floatfmt=".3f")
    if args.report:
        directory = Path(args.report)
        FileHandler.write_json(directory / "suite.json", {**summary, "seeds": json.loads(frame.to_json(orient="records"))})
        FileHandler.write_text(directory / "suite.md", f"# {args.env} (n={args.n})\n\n{table}\n")
    if summary["mean_foresee"] < summary["mean_myopic"]:
        logger.error("Foresight scored below the myopic ego")
        return EXIT_PIPELINE
    logger.info(
        f"Mean ego score: myopic {summary['mean_myopic']:.3f}, foresee {summary['mean_foresee']:.3f}, "
        f"improved on {summary['improved_share']:.0%} of seeds"
    )
    return EXIT_OK


def init_foresee_command(subparsers) -> None:
    parser = register_command(subparsers, "foresee", cmd_foresee, "Compare myopic and foresee egos on a suite.")
    parser.add_argument("--env", required=True, help="Environment name or definition file.")
    parser.add_argument("--n", type=int, default=1, help="Foresight iterations.")
    parser.add_argument("--seeds", default="0-99", help="Seeds, e.g. 0-99.")
    parser.add_argument("--parallelism", type=int, default=None, help="Episodes played at once.")
    parser.add_argument("--report", help="Directory for suite.json and suite.md.")
