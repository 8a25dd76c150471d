# action_space.py
"""
Action spaces, goals and goal scores shared by policies, refiners and the toy
environments.

Actions travel between models and the toolkit as JSON objects
{"action_type": ..., "argument": ...}; inside trajectories they are the plain
text "<action_type> <argument>". The null action "none" is a member of every
space and means the agent passes.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Protocol, Sequence

from s3ap.core import InvalidValueError, S3apError
from s3ap.core.narrative_parser import extract_json_value
from s3ap.core.simulation_step import AgentAction, AgentId, SimulationStep, Trajectory

logger = logging.getLogger(__name__)

MAX_SCORE = 10.0


class ActionDecodeError(S3apError):
    """Raised when a model's action cannot be mapped into the action space."""

    def __init__(self, message, raw=None):
        super().__init__(message)
        self.raw = raw

    def __str__(self):
        if self.raw is None:
            return self.args[0]
        preview = self.raw if len(self.raw) <= 80 else self.raw[:77] + "..."
        return f"{self.args[0]} (Response: {preview!r})"


class ActionSpaceKind(str, Enum):
    ENUMERATED = "Enumerated"
    FREE_TEXT = "FreeTextWithFormat"


def action_object(action: AgentAction) -> dict:
    """{"action_type", "argument"} object of an action."""
    action_type, _, argument = action.raw.strip().partition(" ")
    return {"action_type": action_type, "argument": argument.strip()}


def action_from_object(obj: dict) -> AgentAction:
    action_type = obj.get("action_type")
    if not isinstance(action_type, str) or not action_type.strip():
        raise ActionDecodeError("Action object needs a nonempty 'action_type'")
    argument = obj.get("argument", "")
    if argument is None:
        argument = ""
    if not isinstance(argument, (str, int, float)):
        raise ActionDecodeError("Action 'argument' must be text")
    text = f"{action_type.strip()} {str(argument).strip()}".strip()
    try:
        return AgentAction(text)
    except InvalidValueError as e:
        raise ActionDecodeError(str(e))


@dataclass(frozen=True)
class ActionSpace:
    kind: ActionSpaceKind
    options: tuple[AgentAction, ...] = ()
    format_instructions: str = ""
    action_types: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        object.__setattr__(self, "action_types", tuple(self.action_types))
        if self.kind is ActionSpaceKind.ENUMERATED:
            if not self.options:
                raise InvalidValueError("An enumerated action space needs at least one option")
            if len(set(self.options)) != len(self.options):
                raise InvalidValueError("Enumerated action options must be distinct")
        elif not self.format_instructions.strip():
            raise InvalidValueError("A free-text action space needs format instructions")

    @classmethod
    def enumerated(cls, options: Iterable[str | AgentAction]) -> "ActionSpace":
        return cls(
            ActionSpaceKind.ENUMERATED,
            tuple(o if isinstance(o, AgentAction) else AgentAction(o) for o in options),
        )

    @classmethod
    def free_text(cls, format_instructions: str, action_types: Sequence[str] = ()) -> "ActionSpace":
        return cls(ActionSpaceKind.FREE_TEXT, format_instructions=format_instructions, action_types=tuple(action_types))

    def contains(self, action: AgentAction) -> bool:
        if action.is_none:
            return True
        if self.kind is ActionSpaceKind.ENUMERATED:
            return action in self.options
        return not self.action_types or action_object(action)["action_type"] in self.action_types

    def describe(self) -> str:
        """Format instructions for prompts."""
        if self.kind is ActionSpaceKind.FREE_TEXT:
            return self.format_instructions
        choices = "\n".join(json.dumps(action_object(option)) for option in self.options)
        return (
            'Answer with one JSON object {"action_type": ..., "argument": ...} '
            "chosen from these options:\n"
            f"{choices}\n"
            'or {"action_type": "none", "argument": ""} to pass.'
        )


def decode_action(raw: str, space: ActionSpace) -> AgentAction:
    """
    Decode a model response into an action of `space`.

    Raises:
        ActionDecodeError: when the response holds no action object or the
            action is outside the space.
    """
    try:
        value = extract_json_value(raw)
    except ValueError:
        raise ActionDecodeError("Response holds no JSON action object", raw)
    if isinstance(value, list) and len(value) == 1:
        value = value[0]
    if not isinstance(value, dict):
        raise ActionDecodeError("Action must be a JSON object", raw)
    try:
        action = action_from_object(value)
    except ActionDecodeError as e:
        raise ActionDecodeError(e.args[0], raw)
    if not space.contains(action):
        raise ActionDecodeError(f"Action '{action.raw}' is outside the action space", raw)
    return action


@dataclass(frozen=True)
class Goal:
    description: str
    scorer: Optional[str] = None

    def __post_init__(self):
        if not self.description.strip():
            raise InvalidValueError("Goal description must not be empty")


@dataclass(frozen=True, order=True)
class GoalScore:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= MAX_SCORE:
            raise InvalidValueError(f"Goal score must be within 0..10, got {self.value}")

    @classmethod
    def clipped(cls, value: float) -> "GoalScore":
        return cls(float(min(MAX_SCORE, max(0.0, value))))

    def __float__(self):
        return self.value


class Policy(Protocol):
    """Chooses an action for `agent` from a social world state."""

    agent: AgentId

    def sample(self, space: ActionSpace, state: Trajectory, goal: Goal) -> AgentAction: ...


class Refiner(Protocol):
    """Turns simulated futures into the action actually taken."""

    def refine(
        self,
        space: ActionSpace,
        sim_states: Sequence[SimulationStep],
        original_state: Trajectory,
        goal: Goal,
        intended: AgentAction,
    ) -> AgentAction: ...
