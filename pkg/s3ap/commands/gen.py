"""
commands/gen.py
Generate a synthetic belief-tracking corpus.
"""

import argparse
import logging

import yaml

from s3ap.config import Settings
from s3ap.core.benchmark import CORPUS_MANIFEST, generate_corpus
from s3ap.core.file_handling import FileHandler
from s3ap.core.input_validation import ScenarioParamsInput, ValidationError
from s3ap.project import EXIT_OK, UsageError, register_command, require_file

logger = logging.getLogger(__name__)


def load_params(path) -> ScenarioParamsInput:
    """Generator parameters from a YAML (or JSON) file; defaults without one."""
    if path is None:
        return ScenarioParamsInput()
    try:
        data = yaml.safe_load(FileHandler.read_text(require_file(path, "Params file"))) or {}
        return ScenarioParamsInput.model_validate(data)
    except (yaml.YAMLError, ValidationError) as e:
        raise UsageError(f"Invalid params file {path}: {e}")


def cmd_gen(args: argparse.Namespace, settings: Settings) -> int:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    params = load_params(args.params)
    manifest = generate_corpus(args.seed, args.count, params, args.out_dir)
    print(
        f"scenarios: {manifest['count']}, questions: {manifest['questions']}, "
        f"false-belief scenarios: {manifest['false_belief_scenarios']}"
    )
    print(f"manifest: {args.out_dir}/{CORPUS_MANIFEST}")
    return EXIT_OK


def init_gen_command(subparsers) -> None:
    parser = register_command(subparsers, "gen", cmd_gen, "Generate scenarios, narratives, trajectories and QA lines.")
    parser.add_argument("--seed", type=int, default=0, help="Corpus seed.")
    parser.add_argument("--count", type=int, required=True, help="Number of scenarios.")
    parser.add_argument("--params", help="YAML or JSON file of generator parameters.")
    parser.add_argument("--out-dir", required=True, help="Output directory.")
