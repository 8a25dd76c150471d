# special_tags.py
"""
Substitution of special tags in observations (and states) against the trajectory history.

Functions:
- resolve_state: state text with last-action tags substituted.
- resolve_tags: an agent's observation split into external and mental parts.

Only the current step and the actions of the previous step are ever read.
"""

import logging

from s3ap.core import MalformedTagError, TagAtOriginError, UnknownAgentError, UnknownAgentIndexError
from s3ap.core.simulation_step import (
    AgentId,
    ResolvedObservation,
    SimulationStep,
    Trajectory,
)
from s3ap.core.tag_grammar import TagToken, TokenKind, tokenize

logger = logging.getLogger(__name__)

ACTION_SEPARATOR = "; "


def _previous_step(step: SimulationStep, history: Trajectory, agent: str) -> SimulationStep:
    if step.ordinal == 0:
        raise TagAtOriginError("Last-action tag used at the first timestep", agent)
    if len(history.steps) < step.ordinal:
        raise ValueError(
            f"History holds {len(history.steps)} steps, step {step.ordinal} needs its predecessor"
        )
    return history.steps[step.ordinal - 1]


def _last_action_text(
    token: TagToken, step: SimulationStep, history: Trajectory, agent: str
) -> str:
    previous = _previous_step(step, history, agent)
    agents = history.agents or step.agents
    if token.index is not None:
        if token.index > len(agents):
            raise UnknownAgentIndexError(
                "Last-action tag names an agent index past the agent list",
                token.index,
                len(agents),
            )
        actor = agents[token.index - 1]
        return f"{actor}: {previous.actions[actor].raw}"
    return ACTION_SEPARATOR.join(
        f"{actor}: {previous.actions[actor].raw}"
        for actor in agents
        if not previous.actions[actor].is_none
    )


def resolve_state(step: SimulationStep, history: Trajectory) -> str:
    """
    Return the step's state with `<same_as_last_action[_x] />` substituted.

    A state without tags is returned verbatim.

    Raises:
        MalformedTagError: for `<same_as_state />` or `<mental_state>` inside a state.
        TagAtOriginError, UnknownAgentIndexError: as for observations.
    """
    tokens = tokenize(step.state)
    if all(token.kind is TokenKind.TEXT for token in tokens):
        return step.state

    parts = []
    for token in tokens:
        if token.kind is TokenKind.TEXT:
            parts.append(token.text.strip())
        elif token.kind is TokenKind.LAST_ACTION:
            parts.append(_last_action_text(token, step, history, "state"))
        else:
            raise MalformedTagError(f"{token.kind.value} tag is not allowed in a state", step.state)
    return " ".join(part for part in parts if part)


def resolve_tags(
    step: SimulationStep, history: Trajectory, agent: AgentId
) -> ResolvedObservation:
    """
    Resolve `agent`'s observation at `step`.

    Args:
        step: The step whose observation is resolved.
        history: A trajectory holding at least every step before `step`.
        agent: The observing agent.

    Returns:
        ResolvedObservation: tag-free external text plus the mental-state content.
    """
    if agent not in step.observations:
        raise UnknownAgentError(agent)
    expr = step.observations[agent]
    if expr.is_none:
        return ResolvedObservation(external="", mental=None, is_none=True)

    external, mental = [], []
    for token in tokenize(expr.raw):
        if token.kind is TokenKind.TEXT:
            external.append(token.text.strip())
        elif token.kind is TokenKind.SAME_AS_STATE:
            external.append(resolve_state(step, history))
        elif token.kind is TokenKind.LAST_ACTION:
            external.append(_last_action_text(token, step, history, agent))
        else:
            mental.append(token.text)

    return ResolvedObservation(
        external=" ".join(part for part in external if part),
        mental=" ".join(mental) if mental else None,
    )
