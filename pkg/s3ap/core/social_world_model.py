# social_world_model.py
"""
Social world models: given a trajectory whose last step is the current one,
predict what the other agents do now and what the next step looks like.

The prediction is factored in two calls. `predict_others_actions` gives the
actions of every agent but the ego; `predict_next_step` gives the next step
given the ego's action, and the others' actions when they are known already.

Implementations:
- OracleSocialWorldModel: exact transition and scripted partners of a toy environment.
- LlmSocialWorldModel: a completion backend prompted with the serialized trajectory.
"""

import json
import logging
import threading
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from s3ap.core import InvalidValueError, S3apError, UnknownAgentError
from s3ap.core.agent_memory import append_step
from s3ap.core.llm_backend import CompletionBackend, CompletionRequest
from s3ap.core.narrative_parser import extract_json_value
from s3ap.core.prompt_templates import DEFAULT_VERSION, get_prompt_template
from s3ap.core.simulation_step import AgentAction, AgentId, SimulationStep, Trajectory
from s3ap.core.step_schema import (
    ValidationIssue,
    WireForm,
    decode_step,
    encode_steps,
    model_schema,
    trajectory_tag_issues,
)
from s3ap.core.toy_environments import ToyEnvironment

logger = logging.getLogger(__name__)

NONE = AgentAction.none()
STEP_FORMAT_PREAMBLE = "Answer with one JSON step object that follows this JSON schema:"


class PredictionDecodeError(S3apError):
    """Raised when a model's prediction cannot be mapped onto the trajectory's agents."""

    def __init__(self, message, raw=None, issues: Sequence[ValidationIssue] = ()):
        super().__init__(message)
        self.raw = raw
        self.issues = list(issues)

    def __str__(self):
        if not self.issues:
            return self.args[0]
        first = self.issues[0]
        return f"{self.args[0]} ({len(self.issues)} issue(s), first: {first.path}: {first.message})"


@dataclass(frozen=True)
class SwmQuery:
    trajectory: Trajectory
    ego: AgentId
    ego_action: Optional[AgentAction] = None

    def __post_init__(self):
        if not self.trajectory.steps:
            raise ValueError("A world model query needs at least one step")
        if self.ego not in self.trajectory.agents:
            raise UnknownAgentError(self.ego)

    @property
    def others(self) -> tuple[AgentId, ...]:
        return tuple(a for a in self.trajectory.agents if a != self.ego)


@dataclass(frozen=True)
class NextStepPrediction:
    others_actions: Mapping[AgentId, AgentAction]
    next_step: SimulationStep
    confidence_note: Optional[str] = None


class SocialWorldModel(ABC):
    """Base class of social world models; counts the predictions it makes."""

    def __init__(self, name: str):
        self.name = name
        self.calls: Counter = Counter()
        self._lock = threading.Lock()

    def _count(self, kind: str) -> None:
        with self._lock:
            self.calls[kind] += 1

    @abstractmethod
    def predict_others_actions(self, query: SwmQuery) -> dict[AgentId, AgentAction]: ...

    @abstractmethod
    def next_step(
        self, query: SwmQuery, others_actions: Mapping[AgentId, AgentAction]
    ) -> tuple[SimulationStep, Optional[str]]:
        """The step after every agent acts: the ego as queried, the others as given."""

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


def _complete_others(query: SwmQuery, actions: Mapping[AgentId, AgentAction]) -> dict[AgentId, AgentAction]:
    result = {}
    for agent in query.others:
        if agent in actions:
            result[agent] = actions[agent]
        else:
            logger.warning(f"No predicted action for {agent}; using none")
            result[agent] = NONE
    unknown = set(actions) - set(query.trajectory.agents)
    if unknown:
        raise UnknownAgentError(sorted(unknown)[0])
    return result


def predict_others_actions(model: SocialWorldModel, query: SwmQuery) -> dict[AgentId, AgentAction]:
    """One action per agent other than the ego ("none" allowed)."""
    model._count("others_actions")
    return _complete_others(query, model.predict_others_actions(query))


def predict_next_step(
    model: SocialWorldModel,
    query: SwmQuery,
    others_actions: Optional[Mapping[AgentId, AgentAction]] = None,
) -> NextStepPrediction:
    """
    Predict the step that follows the ego's action.

    Args:
        model: The world model.
        query: Trajectory, ego and the ego's action (None passes).
        others_actions: The others' actions when already known; otherwise
            they are predicted first.
    """
    if others_actions is None:
        others_actions = predict_others_actions(model, query)
    others = _complete_others(query, others_actions)
    model._count("next_step")
    step, note = model.next_step(query, others)
    if set(step.agents) != set(query.trajectory.agents):
        raise PredictionDecodeError(
            f"Predicted step names agents {sorted(step.agents)}, expected {sorted(query.trajectory.agents)}"
        )
    pending = step.with_actions({agent: NONE for agent in step.agents})
    return NextStepPrediction(others, pending, note)


def advance(
    traj: Trajectory,
    prediction: NextStepPrediction,
    ego: AgentId,
    ego_action: Optional[AgentAction],
) -> Trajectory:
    """
    Commit a prediction: the current step's pending actions are filled in and
    the predicted step is appended. `traj` itself is left untouched.
    """
    if not traj.steps:
        raise ValueError("Cannot advance an empty trajectory")
    actions = {agent: NONE for agent in traj.agents}
    actions.update(prediction.others_actions)
    actions[ego] = ego_action or NONE
    current = traj.steps[-1].with_actions(actions)
    committed = Trajectory(traj.steps[:-1] + (current,), traj.agents, traj.metadata)
    pending = prediction.next_step.with_actions({agent: NONE for agent in prediction.next_step.agents})
    return append_step(committed, pending)


def rollout(
    model: SocialWorldModel,
    traj: Trajectory,
    ego: AgentId,
    policy: Callable[[Trajectory], AgentAction],
    n: int,
) -> list[SimulationStep]:
    """
    Predict `n` steps ahead, the ego acting by `policy` on each extended trajectory.

    Raises:
        ValueError: if n is negative.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    steps: list[SimulationStep] = []
    current = traj
    for _ in range(n):
        action = policy(current)
        prediction = predict_next_step(model, SwmQuery(current, ego, action))
        current = advance(current, prediction, ego, action)
        steps.append(current.steps[-1])
    logger.debug(f"Rolled out {n} step(s) with {model.name}")
    return steps


class OracleSocialWorldModel(SocialWorldModel):
    """Exact world model of a toy environment."""

    def __init__(self, env: ToyEnvironment):
        super().__init__(f"oracle:{env.name}")
        self.env = env

    def predict_others_actions(self, query: SwmQuery) -> dict[AgentId, AgentAction]:
        world = self.env.replay(query.trajectory)
        return {agent: self.env.scripted_action(world, agent) for agent in query.others}

    def next_step(self, query, others_actions):
        world = self.env.replay(query.trajectory)
        actions = {**others_actions, query.ego: query.ego_action or NONE}
        return self.env.step_for(self.env.transition(world, actions)), "exact"


def decode_action_lines(raw: str, query: SwmQuery) -> dict[AgentId, AgentAction]:
    """
    Map 'agent_name: action' lines onto the query's other agents.

    Lines for the ego and lines that name no agent are skipped.

    Raises:
        PredictionDecodeError: when no line names one of the other agents.
    """
    actions: dict[AgentId, AgentAction] = {}
    for line in raw.splitlines():
        name, sep, text = line.strip().lstrip("-*").strip().partition(":")
        name = name.strip().strip("*`")
        if not sep or name not in query.trajectory.agents:
            continue
        if name == query.ego:
            logger.warning(f"Dropping predicted action of the ego ({name})")
            continue
        try:
            actions[AgentId(name)] = AgentAction(text.strip() or NONE.raw)
        except InvalidValueError as e:
            raise PredictionDecodeError(f"Bad predicted action for {name}: {e}", raw)
    if query.others and not actions:
        raise PredictionDecodeError("Response names none of the other agents", raw)
    return actions


class LlmSocialWorldModel(SocialWorldModel):
    """World model backed by a completion backend and the prediction prompts."""

    def __init__(
        self,
        backend: CompletionBackend,
        version: str = DEFAULT_VERSION,
        form: WireForm = WireForm.STRING_LIST,
    ):
        super().__init__(f"llm:{backend.identity}")
        self.backend = backend
        self.version = version
        self.form = form

    def serialize(self, traj: Trajectory) -> str:
        return encode_steps(traj.steps, traj.agents, self.form)

    def _ask(self, prompt: str) -> str:
        return self.backend.complete(CompletionRequest.from_prompt(self.backend.model_id, prompt))

    def predict_others_actions(self, query: SwmQuery) -> dict[AgentId, AgentAction]:
        if not query.others:
            return {}
        prompt = get_prompt_template("predict_actions", self.version).render(
            trajectory=self.serialize(query.trajectory),
            ego=query.ego,
            others=", ".join(query.others),
        )
        return decode_action_lines(self._ask(prompt), query)

    def next_step(self, query, others_actions):
        traj = query.trajectory
        actions = {**others_actions, query.ego: query.ego_action or NONE}
        prompt = get_prompt_template("predict_next_step", self.version).render(
            trajectory=self.serialize(traj),
            actions="\n".join(f"{agent}: {actions[agent].raw}" for agent in traj.agents),
            format_instructions=f"{STEP_FORMAT_PREAMBLE}\n{json.dumps(model_schema(self.form), indent=2)}",
        )
        raw = self._ask(prompt)

        try:
            value = extract_json_value(raw)
        except ValueError:
            raise PredictionDecodeError("Response holds no JSON step", raw)
        if isinstance(value, list):
            if not value:
                raise PredictionDecodeError("Response holds an empty step list", raw)
            value = value[-1]
        step, issues = decode_step(json.dumps(value), None, len(traj.steps))
        if issues:
            raise PredictionDecodeError("Predicted step does not validate", raw, issues)
        if set(step.agents) != set(traj.agents):
            raise PredictionDecodeError(
                f"Predicted step names agents {sorted(step.agents)}, expected {sorted(traj.agents)}", raw
            )

        candidate = advance(traj, NextStepPrediction(others_actions, step), query.ego, query.ego_action)
        tag_issues = trajectory_tag_issues(candidate)
        if tag_issues:
            raise PredictionDecodeError("Predicted step holds unresolvable tags", raw, tag_issues)
        return step, None
