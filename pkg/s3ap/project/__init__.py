"""
Helpers shared by the command modules: the command registry, exit codes,
backend resolution and output.
"""

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional

from s3ap.config import ENV_LIVE, Settings
from s3ap.core.llm_backend import CompletionBackend, ResponseCache, ScriptedMockBackend, backend_from_profile

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PIPELINE = 2
EXIT_BACKEND = 3

MOCK_PREFIX = "mock:"
REFERENCE_BACKEND = "reference"
ORACLE_BACKEND = "oracle"
READER_BACKEND = "reader"

CommandHandler = Callable[[argparse.Namespace, Settings], int]

COMMAND_STORE: dict[str, CommandHandler] = {}


class UsageError(Exception):
    """Raised for a command line that cannot be carried out as given."""


def register_command(
    subparsers, name: str, handler: CommandHandler, help: str
) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(name, help=help, description=help)
    parser.set_defaults(command=name)
    COMMAND_STORE[name] = handler
    return parser


def live_enabled(args: argparse.Namespace) -> bool:
    return bool(getattr(args, "live", False)) or os.getenv(ENV_LIVE) == "1"


def make_cache(settings: Settings) -> ResponseCache:
    return ResponseCache(settings.cache_dir)


def resolve_backend(spec: str, settings: Settings, live: bool) -> CompletionBackend:
    """
    Backend named on the command line: `mock:<script.json>` for a scripted
    mock, otherwise a model profile, which needs --live.

    Raises:
        UsageError: for a profile without --live or an unknown profile.
    """
    if spec.startswith(MOCK_PREFIX):
        return ScriptedMockBackend.from_file(spec.removeprefix(MOCK_PREFIX))
    if spec not in settings.profiles:
        raise UsageError(
            f"Unknown backend '{spec}'; use {MOCK_PREFIX}<file> or one of: {', '.join(sorted(settings.profiles))}"
        )
    if not live:
        raise UsageError(f"Backend '{spec}' calls a hosted model; pass --live or set {ENV_LIVE}=1")
    logger.info(f"Using live backend {spec} ({settings.profiles[spec].model_id})")
    return backend_from_profile(settings.profiles[spec], make_cache(settings))


def parse_seeds(text: str) -> list[int]:
    """
    Seeds from '7', '0-99' or '1,4,9'.

    Raises:
        UsageError: when the text is none of these.
    """
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                low, high = (int(p) for p in part.split("-", 1))
                if low > high:
                    raise ValueError
                seeds.extend(range(low, high + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise UsageError(f"Invalid seeds '{text}'; use e.g. 7, 0-99 or 1,4,9")
    if any(seed < 0 for seed in seeds):
        raise UsageError("Seeds must be non-negative")
    return seeds


def require_file(path: Optional[str], what: str = "Input file") -> Path:
    if path is None or not Path(path).is_file():
        raise UsageError(f"{what} does not exist: {path}")
    return Path(path)


def print_json(value: Any) -> None:
    sys.stdout.write(json.dumps(value, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def userguide_path() -> Path:
    return Path(str(resources.files("s3ap.project").joinpath("userguide", "index.rst")))
