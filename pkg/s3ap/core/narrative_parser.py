# narrative_parser.py
"""
Narrative to trajectory conversion.

An LLM backend is prompted with the parse template, a task instruction block
and the embedded schema. Its answer is decoded and validated; on issues the
prompt is rebuilt with numbered feedback and the backend is asked again.

`reference_parse` is the deterministic counterpart for narratives rendered
from oracle scenarios.
"""

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Sequence

from s3ap.config import DEFAULT_MAX_RETRIES
from s3ap.core import S3apError, Trajectory
from s3ap.core.belief_oracle import OracleScenario, TemplateMismatchError, ground_truth_trajectory
from s3ap.core.llm_backend import BackendError, CompletionBackend, CompletionRequest
from s3ap.core.narrative_templates import parse_narrative_text
from s3ap.core.prompt_templates import DEFAULT_VERSION, get_prompt_template, task_block
from s3ap.core.step_schema import (
    IssueCode,
    ValidationIssue,
    WireForm,
    decode_trajectory,
    embedded_schema,
    issues_to_feedback,
    model_schema,
)

logger = logging.getLogger(__name__)

PARSE_TEMPLATE = "parse_narrative"

FORMAT_PREAMBLE = (
    "Answer with a JSON array of simulation steps, one step object per timestep, "
    "in story order. Every step object follows this JSON schema:"
)
STRING_LIST_NOTE = (
    "Write observations and actions as lists of 'agent_name: text' entries, "
    "as in the SocializedStructureForModel definition."
)

_FENCED = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)

__all__ = [
    "ParseTaskName",
    "ParseTask",
    "ParseAttempt",
    "ParseFailedError",
    "TemplateMismatchError",
    "build_parse_prompt",
    "format_instructions",
    "extract_json_value",
    "parse_narrative",
    "reference_parse",
]


class ParseTaskName(str, Enum):
    TOMI = "ToMi"
    PARA_TOMI = "ParaToMi"
    HI_TOM = "HiToM"
    FANTOM = "FANToM"
    MMTOM_QA = "MMToMQA"
    CONFAIDE = "ConfAIde"
    GENERIC = "Generic"


@dataclass(frozen=True)
class ParseTask:
    name: ParseTaskName
    instructions: str
    exemplar: str

    def __post_init__(self):
        if self.name is not ParseTaskName.GENERIC and not self.instructions.strip():
            raise ValueError(f"Task {self.name.value} needs an instruction block")

    @classmethod
    def named(cls, name: str | ParseTaskName) -> "ParseTask":
        """
        Load a task with its instruction block and exemplar.

        Raises:
            KeyError: for an unknown task name.
        """
        try:
            task_name = ParseTaskName(name)
        except ValueError:
            raise KeyError(f"Unknown parse task: {name}")
        instructions, exemplar = task_block(task_name.value)
        return cls(task_name, instructions, exemplar)


@dataclass(frozen=True)
class ParseAttempt:
    attempt_index: int
    prompt: str
    raw_response: str
    issues: tuple[ValidationIssue, ...]

    @property
    def succeeded(self) -> bool:
        return not self.issues

    def to_dict(self) -> dict:
        return {
            "attempt_index": self.attempt_index,
            "raw_response": self.raw_response,
            "issues": [issue.to_dict() for issue in self.issues],
        }


class ParseFailedError(S3apError):
    """Raised when no attempt produced a valid trajectory."""

    def __init__(self, attempts: Sequence[ParseAttempt]):
        super().__init__(f"Parsing failed after {len(attempts)} attempt(s)")
        self.attempts = list(attempts)

    def __str__(self):
        if not self.attempts or not self.attempts[-1].issues:
            return self.args[0]
        last = self.attempts[-1].issues
        return f"{self.args[0]} (last attempt: {len(last)} issue(s), first: {last[0].path}: {last[0].message})"


def format_instructions(form: WireForm = WireForm.OBJECT_MAP) -> str:
    text = f"{FORMAT_PREAMBLE}\n{embedded_schema()}"
    if form is WireForm.STRING_LIST:
        text += f"\n{STRING_LIST_NOTE}"
    return text


def build_parse_prompt(
    narrative: str,
    task: ParseTask,
    feedback: Optional[str] = None,
    form: WireForm = WireForm.OBJECT_MAP,
    version: str = DEFAULT_VERSION,
) -> str:
    """
    Fill the parse template for one narrative.

    Sections whose content is absent (no feedback, no task instructions, no
    exemplar) are left out of the prompt.

    Raises:
        ValueError: if the narrative is empty.
    """
    if not narrative.strip():
        raise ValueError("Cannot build a parse prompt for an empty narrative")
    return get_prompt_template(PARSE_TEMPLATE, version).render(
        context=narrative,
        task_specific_instructions=task.instructions or None,
        example_analysis=task.exemplar or None,
        feedback=feedback,
        format_instructions=format_instructions(form),
    )


def extract_json_value(text: str) -> Any:
    """
    First JSON value in a model response.

    Fenced code blocks are tried first; otherwise decoding starts at each `[`
    or `{` in turn until one yields a complete value.

    Raises:
        ValueError: if the response holds no JSON value.
    """
    decoder = json.JSONDecoder()
    candidates = [block.strip() for block in _FENCED.findall(text)] + [text]
    for candidate in candidates:
        for match in re.finditer(r"[\[{]", candidate):
            try:
                value, _ = decoder.raw_decode(candidate, match.start())
            except json.JSONDecodeError:
                continue
            return value
    raise ValueError("Response holds no JSON value")


def _constrained_schema(form: WireForm) -> str:
    wrapper = {
        "type": "object",
        "properties": {"steps": {"type": "array", "items": model_schema(form)}},
        "required": ["steps"],
    }
    return json.dumps(wrapper, sort_keys=True)


def _attempt_issues(raw: str, form: Optional[WireForm]) -> tuple[Optional[Trajectory], list[ValidationIssue]]:
    try:
        value = extract_json_value(raw)
    except ValueError:
        return None, [ValidationIssue("$", IssueCode.PARSE_ERROR, "response holds no JSON value")]
    return decode_trajectory(value, form)


def parse_narrative(
    narrative: str,
    task: ParseTask,
    backend: CompletionBackend,
    max_retries: int = DEFAULT_MAX_RETRIES,
    form: WireForm = WireForm.OBJECT_MAP,
) -> tuple[Trajectory, list[ParseAttempt]]:
    """
    Parse a narrative into a validated trajectory.

    The prompt depends only on the narrative, the task and the previous
    attempt's issues.

    Args:
        narrative: Free-form story or conversation text.
        task: Task whose perception rules and exemplar go into the prompt.
        backend: Completion backend that performs the parsing.
        max_retries: Extra attempts after the first one fails validation.
        form: Wire form the backend is asked to emit.

    Returns:
        (trajectory, attempts): the trajectory carries provenance metadata.

    Raises:
        ParseFailedError: after max_retries + 1 invalid attempts.
        BackendError: from the backend, with `attempt_index` set.
    """
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")
    schema = _constrained_schema(form) if backend.supports_json_mode else None

    attempts: list[ParseAttempt] = []
    feedback = None
    for index in range(max_retries + 1):
        prompt = build_parse_prompt(narrative, task, feedback, form)
        request = CompletionRequest.from_prompt(
            backend.model_id, prompt, temperature=0.0, constrained_schema=schema
        )
        try:
            raw = backend.complete(request)
        except BackendError as e:
            e.attempt_index = index
            e.add_note(f"while parsing a {task.name.value} narrative (attempt {index})")
            raise

        traj, issues = _attempt_issues(raw, form)
        attempts.append(ParseAttempt(index, prompt, raw, tuple(issues)))
        if not issues:
            logger.info(f"Parsed narrative into {len(traj)} step(s) after {index + 1} attempt(s)")
            return (
                traj.with_metadata(
                    source_narrative=narrative,
                    task=task.name.value,
                    backend=backend.identity,
                    attempts=len(attempts),
                ),
                attempts,
            )
        logger.warning(f"Parse attempt {index} returned {len(issues)} issue(s)")
        feedback = issues_to_feedback(issues)

    raise ParseFailedError(attempts)


def reference_parse(narrative: str, scenario: Optional[OracleScenario] = None) -> Trajectory:
    """
    Deterministic parse of a narrative rendered from an oracle scenario.

    Raises:
        TemplateMismatchError: if a sentence is outside the rendering grammar,
            or the parsed scenario differs from `scenario`.
    """
    parsed = parse_narrative_text(narrative)
    if scenario is not None and parsed != scenario:
        raise TemplateMismatchError("Narrative describes a different scenario than the one given")
    traj = ground_truth_trajectory(parsed)
    logger.debug(f"Reference parse produced {len(traj)} step(s)")
    return traj
