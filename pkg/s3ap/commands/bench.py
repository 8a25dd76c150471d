"""
commands/bench.py
Run a QA benchmark with or without the structured trajectory as extra information.
"""

import argparse
import logging
from pathlib import Path

from s3ap.config import Settings
from s3ap.core.benchmark import (
    BeliefRuleReader,
    Condition,
    DatasetFormat,
    ParserConfig,
    comparison_markdown,
    load_dataset,
    run_benchmark,
    write_report,
)
from s3ap.core.file_handling import FileHandler
from s3ap.core.narrative_parser import ParseTask, ParseTaskName
from s3ap.project import (
    EXIT_OK,
    EXIT_PIPELINE,
    READER_BACKEND,
    REFERENCE_BACKEND,
    UsageError,
    live_enabled,
    register_command,
    require_file,
    resolve_backend,
)

logger = logging.getLogger(__name__)

BOTH = "Both"
COMPARISON_FILE = "comparison.md"


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    try:
        task = ParseTask.named(args.task)
    except KeyError as e:
        raise UsageError(e.args[0])
    dataset = require_file(args.dataset, "Dataset file")
    live = live_enabled(args)
    parallelism = args.parallelism or settings.parallelism
    max_retries = settings.max_retries if args.max_retries is None else args.max_retries

    if args.backend == READER_BACKEND:
        answer_backend = BeliefRuleReader()
    else:
        answer_backend = resolve_backend(args.backend, settings, live)
    parser_backend = None if args.parser == REFERENCE_BACKEND else resolve_backend(args.parser, settings, live)
    parser = ParserConfig(task, parser_backend, max_retries)

    items = load_dataset(dataset, DatasetFormat(args.format))
    conditions = [Condition.BASELINE, Condition.WITH_S3AP] if args.condition == BOTH else [Condition(args.condition)]
    reports = {}
    for condition in conditions:
        report = run_benchmark(items, condition, answer_backend, parser, parallelism, task.name.value)
        reports[condition] = report
        print(f"{task.name.value} {condition.value}: accuracy {report.accuracy:.3f}"
              + ("" if report.all_qs is None else f", all-qs {report.all_qs:.3f}"))
        if args.report:
            directory = Path(args.report)
            if len(conditions) > 1:
                directory = directory / condition.value
            write_report(report, directory)

    if args.report and len(reports) == 2:
        FileHandler.write_text(
            Path(args.report) / COMPARISON_FILE,
            comparison_markdown(reports[Condition.BASELINE], reports[Condition.WITH_S3AP]),
        )

    if args.min_accuracy is not None:
        missed = [c.value for c, r in reports.items() if r.accuracy < args.min_accuracy]
        if missed:
            logger.error(f"Accuracy below {args.min_accuracy} for: {', '.join(missed)}")
            return EXIT_PIPELINE
    return EXIT_OK


def init_bench_command(subparsers) -> None:
    parser = register_command(subparsers, "bench", cmd_bench, "Run a QA benchmark.")
    parser.add_argument("--task", default=ParseTaskName.TOMI.value, help="Parse task of the dataset's contexts.")
    parser.add_argument("--dataset", required=True, help="Dataset JSONL file.")
    parser.add_argument("--format", choices=[f.value for f in DatasetFormat], default=DatasetFormat.S3AP_SYNTHETIC.value)
    parser.add_argument(
        "--condition", choices=[c.value for c in Condition] + [BOTH], default=Condition.WITH_S3AP.value
    )
    parser.add_argument("--backend", default=READER_BACKEND, help="Answering backend: 'reader', mock:<file> or a profile.")
    parser.add_argument("--parser", default=REFERENCE_BACKEND, help="Parser: 'reference', mock:<file> or a profile.")
    parser.add_argument("--max-retries", type=int, default=None, help="Parse retries per context.")
    parser.add_argument("--parallelism", type=int, default=None, help="Items answered at once.")
    parser.add_argument("--report", help="Directory for report.json and report.md.")
    parser.add_argument("--min-accuracy", type=float, default=None, help="Exit 2 when accuracy is below this.")
