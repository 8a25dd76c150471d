# prompt_templates.py
"""
Versioned prompt templates and task instruction blocks, loaded from packaged assets.

Templates live in s3ap/assets/prompts as `<name>.<version>.txt` and use
`{slot}` placeholders. Task blocks live in s3ap/assets/tasks.yml.
"""

import hashlib
import logging
import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

import yaml

from s3ap.core import S3apError

logger = logging.getLogger(__name__)

DEFAULT_VERSION = "v1"


class PromptSlotError(S3apError):
    """Raised when a template is rendered with missing or unknown slots."""

    def __init__(self, message, template=None):
        super().__init__(message)
        self.template = template

    def __str__(self):
        return f"{self.args[0]} (Template: {self.template})"


def _slots_of(text: str) -> frozenset[str]:
    return frozenset(
        field for _, field, _, _ in string.Formatter().parse(text) if field
    )


@dataclass(frozen=True)
class PromptTemplate:
    """A versioned prompt template."""

    name: str
    version: str
    text: str

    @property
    def key(self) -> str:
        return f"{self.name}.{self.version}"

    @property
    def slots(self) -> frozenset[str]:
        return _slots_of(self.text)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:16]

    def render(self, **values: Optional[str]) -> str:
        """
        Fill every slot of the template.

        A slot given as None elides the whole paragraph (blank-line separated
        block) that holds it.

        Raises:
            PromptSlotError: if a slot is missing or an unknown slot is given.
        """
        missing = self.slots - values.keys()
        unknown = values.keys() - self.slots
        if missing or unknown:
            raise PromptSlotError(
                f"Missing slots {sorted(missing)}, unknown slots {sorted(unknown)}", self.key
            )
        blocks = [
            block
            for block in self.text.split("\n\n")
            if not any(values[slot] is None for slot in _slots_of(block))
        ]
        filled = {slot: value for slot, value in values.items() if value is not None}
        return "\n\n".join(blocks).format(**filled)


@lru_cache(maxsize=None)
def get_prompt_template(name: str, version: str = DEFAULT_VERSION) -> PromptTemplate:
    """Load a template by name and version or raise a KeyError."""
    asset = resources.files("s3ap.assets").joinpath("prompts", f"{name}.{version}.txt")
    if not asset.is_file():
        raise KeyError(f"Unknown prompt template: {name}.{version}")
    text = asset.read_text(encoding="utf-8").removesuffix("\n")
    return PromptTemplate(name=name, version=version, text=text)


def available_templates() -> tuple[str, ...]:
    prompts = resources.files("s3ap.assets").joinpath("prompts")
    return tuple(
        sorted(
            entry.name.removesuffix(".txt")
            for entry in prompts.iterdir()
            if entry.name.endswith(".txt")
        )
    )


@lru_cache(maxsize=1)
def _task_book() -> dict:
    text = resources.files("s3ap.assets").joinpath("tasks.yml").read_text(encoding="utf-8")
    return yaml.safe_load(text)["tasks"]


def task_block(name: str) -> tuple[str, str]:
    """
    (instructions, exemplar) for a parse task, following `uses:` references.

    Raises:
        KeyError: for an unknown task name.
    """
    book = _task_book()
    if name not in book:
        raise KeyError(f"Unknown parse task: {name}")
    entry = book[name]
    seen = {name}
    while "uses" in entry:
        target = entry["uses"]
        if target in seen or target not in book:
            raise KeyError(f"Bad task reference {name} -> {target}")
        seen.add(target)
        entry = book[target]
    return entry.get("instructions") or "", entry.get("exemplar") or ""


def task_names() -> tuple[str, ...]:
    return tuple(_task_book())
