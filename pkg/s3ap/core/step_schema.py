# step_schema.py
"""
Serialization and validation of simulation steps in their two wire forms.

ObjectMap:   "observations": {"Sally": "...", "Anne": "..."}
StringList:  "observations": ["Sally: ...", "Anne: ..."]

Decoding never stops at the first problem: every issue found in a document is
reported together so that a model can repair all of them in one retry.
"""

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from s3ap.core import (
    InvalidValueError,
    MalformedTagError,
    S3apError,
    TagAtOriginError,
    UnknownAgentIndexError,
)
from s3ap.core.file_handling import FileHandler
from s3ap.core.simulation_step import (
    AgentAction,
    AgentId,
    ObservationExpr,
    SimulationStep,
    Timestep,
    Trajectory,
    agent_id,
)
from s3ap.core.special_tags import resolve_state, resolve_tags
from s3ap.core.tag_grammar import TokenKind, contains_tag_fragment, tokenize

logger = logging.getLogger(__name__)

SCHEMA_ASSET = "socialized_structure.schema.json"
EMBEDDED_SCHEMA_SHA256 = "acad06c09096b95e5a97f3d1f2fd1fd99fe9f1be51e3afbc25d49bb8c6ca8ef3"
REQUIRED_FIELDS = ("timestep", "state", "observations", "actions")
TRAJECTORY_SUFFIX = ".s3ap.json"


class WireForm(str, Enum):
    OBJECT_MAP = "object_map"
    STRING_LIST = "string_list"


class IssueCode(str, Enum):
    MISSING_FIELD = "MissingField"
    BAD_ENTRY_FORMAT = "BadEntryFormat"
    AGENT_SET_MISMATCH = "AgentSetMismatch"
    MALFORMED_TAG = "MalformedTag"
    EMPTY_VALUE = "EmptyValue"
    NON_OBJECT_STEP = "NonObjectStep"
    PARSE_ERROR = "ParseError"


@dataclass(frozen=True)
class ValidationIssue:
    path: str
    code: IssueCode
    message: str

    def to_dict(self) -> dict:
        return {"path": self.path, "code": self.code.value, "message": self.message}


class SchemaValidationError(S3apError):
    """Raised when a trajectory file does not validate."""

    def __init__(self, issues: Sequence[ValidationIssue], path=None):
        super().__init__(f"{len(issues)} validation issue(s)")
        self.issues = list(issues)
        self.path = path

    def __str__(self):
        return f"{self.args[0]} (File: {self.path})"


@lru_cache(maxsize=1)
def embedded_schema() -> str:
    """The SocializedStructure JSON schema document, verbatim."""
    return resources.files("s3ap.assets").joinpath(SCHEMA_ASSET).read_text(encoding="utf-8")


def schema_digest() -> str:
    return hashlib.sha256(embedded_schema().encode("utf-8")).hexdigest()


def model_schema(form: WireForm) -> dict:
    """Schema object for one wire form, for constrained decoding requests."""
    document = json.loads(embedded_schema())
    if form is WireForm.STRING_LIST:
        return document["definitions"]["SocializedStructureForModel"]
    document.pop("definitions", None)
    return document


# ---------------------------------------------------------------- decoding


def _preview(value: Any, limit: int = 60) -> str:
    text = value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)
    return text if len(text) <= limit else text[: limit - 3] + "..."


class _StepDecoder:
    """Collects issues while decoding one step object."""

    def __init__(self, path: str):
        self.path = path
        self.issues: list[ValidationIssue] = []

    def add(self, path: str, code: IssueCode, message: str) -> None:
        self.issues.append(ValidationIssue(path, code, message))

    def timestep(self, value: Any) -> Optional[str]:
        path = f"{self.path}.timestep"
        if isinstance(value, bool) or not isinstance(value, (str, int)):
            self.add(path, IssueCode.BAD_ENTRY_FORMAT, f"timestep must be a string, got {_preview(value)}")
            return None
        raw = str(value)
        if not raw.strip():
            self.add(path, IssueCode.EMPTY_VALUE, "timestep is empty")
            return None
        return raw

    def state(self, value: Any) -> Optional[str]:
        path = f"{self.path}.state"
        if not isinstance(value, str):
            self.add(path, IssueCode.BAD_ENTRY_FORMAT, f"state must be a string, got {_preview(value)}")
            return None
        if not value.strip():
            self.add(path, IssueCode.EMPTY_VALUE, "state is empty (use 'none' when there is no context)")
            return None
        try:
            tokens = tokenize(value)
        except MalformedTagError as e:
            self.add(path, IssueCode.MALFORMED_TAG, f"{e.args[0]} in state {_preview(value)!r}")
            return None
        for token in tokens:
            if token.kind in (TokenKind.SAME_AS_STATE, TokenKind.MENTAL):
                self.add(
                    path,
                    IssueCode.MALFORMED_TAG,
                    f"the {token.kind.value} tag is not allowed in a state ({_preview(value)!r})",
                )
                return None
        return value

    def entries(
        self, field: str, value: Any, form: Optional[WireForm]
    ) -> Optional[dict[AgentId, str]]:
        path = f"{self.path}.{field}"
        if isinstance(value, list):
            found = WireForm.STRING_LIST
        elif isinstance(value, dict):
            found = WireForm.OBJECT_MAP
        else:
            self.add(
                path,
                IssueCode.BAD_ENTRY_FORMAT,
                f"{field} must be an object or a list of 'agent_name: {field[:-1]}' strings, "
                f"got {_preview(value)}",
            )
            return None
        if form is not None and found is not form:
            expected = "a list of strings" if form is WireForm.STRING_LIST else "an object"
            self.add(path, IssueCode.BAD_ENTRY_FORMAT, f"{field} must be {expected}")
            return None

        pairs: list[tuple[str, str, Any]] = []
        if found is WireForm.STRING_LIST:
            for i, entry in enumerate(value):
                entry_path = f"{path}[{i}]"
                if not isinstance(entry, str) or ": " not in entry:
                    self.add(
                        entry_path,
                        IssueCode.BAD_ENTRY_FORMAT,
                        f"entry {_preview(entry)!r} is not in the 'agent_name: {field[:-1]}' format",
                    )
                    continue
                name, payload = entry.split(": ", 1)
                pairs.append((entry_path, name, payload))
        else:
            for name, payload in value.items():
                pairs.append((f"{path}.{name}", name, payload))

        result: dict[AgentId, str] = {}
        ok = True
        for entry_path, name, payload in pairs:
            try:
                agent = agent_id(name)
            except InvalidValueError as e:
                self.add(entry_path, IssueCode.BAD_ENTRY_FORMAT, f"invalid agent name {name!r}: {e}")
                ok = False
                continue
            if agent in result:
                self.add(entry_path, IssueCode.BAD_ENTRY_FORMAT, f"agent '{agent}' appears twice in {field}")
                ok = False
                continue
            if not isinstance(payload, str):
                self.add(
                    entry_path,
                    IssueCode.BAD_ENTRY_FORMAT,
                    f"{field[:-1]} of '{agent}' must be a string, got {_preview(payload)}",
                )
                ok = False
                continue
            if not payload.strip():
                self.add(
                    entry_path,
                    IssueCode.EMPTY_VALUE,
                    f"{field[:-1]} of '{agent}' is empty (use 'none')",
                )
                ok = False
                continue
            if field == "observations":
                try:
                    tokenize(payload)
                except MalformedTagError as e:
                    self.add(
                        entry_path,
                        IssueCode.MALFORMED_TAG,
                        f"{e.args[0]} in the observation of '{agent}': {_preview(payload)!r}",
                    )
                    ok = False
                    continue
            elif contains_tag_fragment(payload):
                self.add(
                    entry_path,
                    IssueCode.MALFORMED_TAG,
                    f"the action of '{agent}' must not contain special tags: {_preview(payload)!r}",
                )
                ok = False
                continue
            result[agent] = payload
        if len(pairs) != len(value):
            ok = False
        return result if ok else None


def _decode_step_object(
    obj: Any, form: Optional[WireForm], ordinal: int, path: str
) -> tuple[Optional[SimulationStep], list[ValidationIssue], dict[str, Any]]:
    decoder = _StepDecoder(path)
    if not isinstance(obj, dict):
        decoder.add(path, IssueCode.NON_OBJECT_STEP, f"step must be a JSON object, got {_preview(obj)}")
        return None, decoder.issues, {}

    for name in REQUIRED_FIELDS:
        if name not in obj:
            decoder.add(path, IssueCode.MISSING_FIELD, f"missing required field '{name}'")
    extras = {f"{path}.{k}": v for k, v in obj.items() if k not in REQUIRED_FIELDS}

    timestep = decoder.timestep(obj["timestep"]) if "timestep" in obj else None
    state = decoder.state(obj["state"]) if "state" in obj else None
    observations = (
        decoder.entries("observations", obj["observations"], form) if "observations" in obj else None
    )
    actions = decoder.entries("actions", obj["actions"], form) if "actions" in obj else None

    if observations is not None and actions is not None and set(observations) != set(actions):
        decoder.add(
            path,
            IssueCode.AGENT_SET_MISMATCH,
            f"observations name {sorted(observations)} but actions name {sorted(actions)}",
        )
    if decoder.issues:
        return None, decoder.issues, extras

    step = SimulationStep(
        timestep=Timestep(timestep, ordinal),
        state=state,
        observations={agent: ObservationExpr(text) for agent, text in observations.items()},
        actions={agent: AgentAction(actions[agent]) for agent in observations},
    )
    return step, [], extras


def decode_step(
    document: str, form: Optional[WireForm] = None, ordinal: int = 0
) -> tuple[Optional[SimulationStep], list[ValidationIssue]]:
    """
    Decode one step from JSON text.

    Args:
        document: JSON text of a single step object.
        form: Expected wire form, or None to detect it from the document.
        ordinal: Position the decoded step takes in its trajectory.

    Returns:
        (step, issues): the step is None whenever issues is nonempty.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as e:
        return None, [ValidationIssue("$", IssueCode.PARSE_ERROR, f"document is not valid JSON: {e}")]
    step, issues, _ = _decode_step_object(obj, form, ordinal, f"steps[{ordinal}]")
    return step, issues


def trajectory_tag_issues(traj: Trajectory) -> list[ValidationIssue]:
    issues = []
    for step in traj.steps:
        path = f"steps[{step.ordinal}]"
        try:
            resolve_state(step, traj)
        except (TagAtOriginError, UnknownAgentIndexError, MalformedTagError) as e:
            issues.append(ValidationIssue(f"{path}.state", IssueCode.MALFORMED_TAG, str(e)))
        for agent in traj.agents:
            try:
                resolve_tags(step, traj, agent)
            except (TagAtOriginError, UnknownAgentIndexError, MalformedTagError) as e:
                issues.append(
                    ValidationIssue(f"{path}.observations.{agent}", IssueCode.MALFORMED_TAG, str(e))
                )
    return issues


def decode_trajectory(
    document: Any, form: Optional[WireForm] = None
) -> tuple[Optional[Trajectory], list[ValidationIssue]]:
    """
    Decode a trajectory from JSON text or an already-parsed value.

    Accepted shapes: a bare array of steps, a single step object, or a
    {"agents": [...], "steps": [...], "metadata": {...}} document. Fields the
    format does not know are kept under metadata["extra_fields"] by path.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            return None, [ValidationIssue("$", IssueCode.PARSE_ERROR, f"document is not valid JSON: {e}")]

    issues: list[ValidationIssue] = []
    metadata: dict[str, Any] = {}
    extras: dict[str, Any] = {}
    declared_agents = None

    if isinstance(document, list):
        raw_steps = document
    elif isinstance(document, dict) and "steps" in document:
        raw_steps = document["steps"]
        if not isinstance(raw_steps, list):
            issues.append(ValidationIssue("steps", IssueCode.BAD_ENTRY_FORMAT, "steps must be a list of step objects"))
            raw_steps = []
        if isinstance(document.get("metadata"), dict):
            metadata.update(document["metadata"])
        elif "metadata" in document:
            issues.append(ValidationIssue("metadata", IssueCode.BAD_ENTRY_FORMAT, "metadata must be an object"))
        declared_agents = document.get("agents")
        extras.update(
            {k: v for k, v in document.items() if k not in ("agents", "steps", "metadata")}
        )
    elif isinstance(document, dict) and any(k in document for k in REQUIRED_FIELDS):
        raw_steps = [document]
    else:
        return None, [
            ValidationIssue(
                "$",
                IssueCode.NON_OBJECT_STEP,
                f"expected a list of steps or a trajectory object, got {_preview(document)}",
            )
        ]

    steps: list[SimulationStep] = []
    for i, raw in enumerate(raw_steps):
        step, step_issues, step_extras = _decode_step_object(raw, form, i, f"steps[{i}]")
        issues.extend(step_issues)
        extras.update(step_extras)
        if step is not None:
            steps.append(step)

    agents: list[AgentId] = []
    if declared_agents is not None:
        if not isinstance(declared_agents, list):
            issues.append(ValidationIssue("agents", IssueCode.BAD_ENTRY_FORMAT, "agents must be a list of names"))
        else:
            for i, name in enumerate(declared_agents):
                try:
                    agent = agent_id(name)
                except InvalidValueError as e:
                    issues.append(ValidationIssue(f"agents[{i}]", IssueCode.BAD_ENTRY_FORMAT, str(e)))
                    continue
                if agent in agents:
                    issues.append(
                        ValidationIssue(f"agents[{i}]", IssueCode.BAD_ENTRY_FORMAT, f"agent '{agent}' is listed twice")
                    )
                    continue
                agents.append(agent)
    elif steps:
        agents = list(steps[0].agents)

    for step in steps:
        if set(step.agents) != set(agents):
            issues.append(
                ValidationIssue(
                    f"steps[{step.ordinal}]",
                    IssueCode.AGENT_SET_MISMATCH,
                    f"step names agents {sorted(step.agents)} but the trajectory has {sorted(agents)}",
                )
            )
    if issues:
        return None, issues

    if extras:
        metadata["extra_fields"] = extras
    traj = Trajectory(tuple(steps), tuple(agents), metadata)
    tag_issues = trajectory_tag_issues(traj)
    if tag_issues:
        return None, tag_issues
    return traj, []


# ---------------------------------------------------------------- encoding


def _encode_entries(
    values: Mapping[AgentId, Any], agents: Sequence[AgentId], form: WireForm
) -> Any:
    if form is WireForm.STRING_LIST:
        return [f"{agent}: {values[agent].raw}" for agent in agents]
    return {agent: values[agent].raw for agent in agents}


def step_to_object(
    step: SimulationStep, form: WireForm, agents: Optional[Sequence[AgentId]] = None
) -> dict:
    agents = tuple(agents) if agents else step.agents
    return {
        "timestep": step.timestep.raw,
        "state": step.state,
        "observations": _encode_entries(step.observations, agents, form),
        "actions": _encode_entries(step.actions, agents, form),
    }


def encode_step(
    step: SimulationStep, form: WireForm, agents: Optional[Sequence[AgentId]] = None
) -> str:
    """Canonical JSON text of one step; agents are written in `agents` order."""
    return json.dumps(step_to_object(step, form, agents), indent=2, ensure_ascii=False)


def encode_steps(
    steps: Sequence[SimulationStep], agents: Sequence[AgentId], form: WireForm
) -> str:
    """JSON array of steps, the shape used inside prompts."""
    return json.dumps(
        [step_to_object(step, form, agents) for step in steps], indent=2, ensure_ascii=False
    )


def trajectory_to_object(traj: Trajectory, form: WireForm = WireForm.OBJECT_MAP) -> dict:
    return {
        "agents": list(traj.agents),
        "steps": [step_to_object(step, form, traj.agents) for step in traj.steps],
        "metadata": json.loads(json.dumps(dict(traj.metadata), default=str)),
    }


def encode_trajectory(traj: Trajectory, form: WireForm = WireForm.OBJECT_MAP) -> str:
    return json.dumps(trajectory_to_object(traj, form), indent=2, ensure_ascii=False) + "\n"


def read_trajectory(path: str | Path, form: Optional[WireForm] = None) -> Trajectory:
    """
    Read a `.s3ap.json` trajectory file.

    Raises:
        FileHandlerError: if the file is missing.
        SchemaValidationError: if the document does not validate.
    """
    text = FileHandler.read_text(path)
    traj, issues = decode_trajectory(text, form)
    if issues:
        raise SchemaValidationError(issues, path)
    return traj


def validate_document(text: str, form: Optional[WireForm] = None) -> list[ValidationIssue]:
    _, issues = decode_trajectory(text, form)
    return issues


def write_trajectory(
    traj: Trajectory, path: str | Path, form: WireForm = WireForm.OBJECT_MAP
) -> Path:
    path = FileHandler.write_text(path, encode_trajectory(traj, form))
    logger.info(f"Trajectory with {len(traj)} steps written to {path}")
    return path


# ---------------------------------------------------------------- feedback


def _path_key(path: str) -> list:
    return [int(part) if part.isdigit() else part for part in re.split(r"(\d+)", path)]


def issues_to_feedback(issues: Sequence[ValidationIssue]) -> str:
    """
    Numbered, path-ordered feedback block for the retry prompt.

    Raises:
        ValueError: if `issues` is empty.
    """
    if not issues:
        raise ValueError("issues_to_feedback needs at least one issue")
    ordered = sorted(issues, key=lambda issue: _path_key(issue.path))
    return "\n".join(
        f"{i}. {issue.path}: {issue.message}" for i, issue in enumerate(ordered, start=1)
    )
