# simulation_step.py
"""
This module contains the immutable value types of a structured social world state.

A Trajectory is an ordered sequence of SimulationSteps. Each step carries the
environment state before anyone acts, one observation expression per agent and
one action per agent.

DataClasses:
- Timestep, ObservationExpr, ResolvedObservation, AgentAction
- SimulationStep, Trajectory
"""

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Iterable, Mapping, NewType, Optional

from s3ap.core import AgentSetMismatchError, InvalidValueError, UnknownAgentError
from s3ap.core.tag_grammar import contains_tag_fragment, tokenize

AgentId = NewType("AgentId", str)

NONE_TEXT = "none"


def is_none_text(text: str) -> bool:
    """'none' sentinel check: trimmed and case-insensitive."""
    return text.strip().lower() == NONE_TEXT


def agent_id(name: str) -> AgentId:
    """Validate and normalize an agent name (trimmed, case preserved)."""
    if not isinstance(name, str):
        raise InvalidValueError(f"Agent name must be text, got {type(name).__name__}")
    trimmed = name.strip()
    if not trimmed:
        raise InvalidValueError("Agent name must not be empty")
    if is_none_text(trimmed):
        raise InvalidValueError("'none' is not a valid agent name")
    if ": " in trimmed:
        raise InvalidValueError(f"Agent name must not contain ': ' ({trimmed!r})")
    return AgentId(trimmed)


def _frozen_map(mapping: Mapping) -> Mapping:
    return MappingProxyType(dict(mapping))


@dataclass(frozen=True)
class Timestep:
    """Display text of a timestep plus its normalized position in the trajectory."""

    raw: str
    ordinal: int = 0

    def __post_init__(self):
        if not isinstance(self.raw, str) or not self.raw.strip():
            raise InvalidValueError("Timestep text must not be empty")
        if self.ordinal < 0:
            raise InvalidValueError(f"Timestep ordinal must be >= 0, got {self.ordinal}")


@dataclass(frozen=True)
class ObservationExpr:
    """Raw observation text, possibly holding special tags."""

    raw: str

    def __post_init__(self):
        if not isinstance(self.raw, str) or not self.raw.strip():
            raise InvalidValueError("Observation must not be empty (use 'none')")
        tokenize(self.raw)

    @property
    def is_none(self) -> bool:
        return is_none_text(self.raw)


@dataclass(frozen=True)
class ResolvedObservation:
    """Observation after tag substitution, split into external and mental parts."""

    external: str
    mental: Optional[str] = None
    is_none: bool = False

    def __post_init__(self):
        if contains_tag_fragment(self.external):
            raise InvalidValueError(f"Resolved observation still holds tags: {self.external!r}")
        if self.is_none and (self.external or self.mental is not None):
            raise InvalidValueError("A null observation carries no content")

    def render(self) -> str:
        if self.is_none:
            return NONE_TEXT
        if self.mental is None:
            return self.external
        return f"{self.external} (thinking: {self.mental})".strip()


@dataclass(frozen=True)
class AgentAction:
    raw: str

    def __post_init__(self):
        if not isinstance(self.raw, str) or not self.raw.strip():
            raise InvalidValueError("Action must not be empty (use 'none')")
        if contains_tag_fragment(self.raw):
            raise InvalidValueError(f"Actions cannot hold special tags: {self.raw!r}")

    @property
    def is_none(self) -> bool:
        return is_none_text(self.raw)

    @classmethod
    def none(cls) -> "AgentAction":
        return cls(NONE_TEXT)


@dataclass(frozen=True)
class SimulationStep:
    """One timestep: environment state, per-agent observations and actions."""

    timestep: Timestep
    state: str
    observations: Mapping[AgentId, ObservationExpr]
    actions: Mapping[AgentId, AgentAction]

    def __post_init__(self):
        if not isinstance(self.state, str) or not self.state.strip():
            raise InvalidValueError("State must not be empty (use 'none')")
        if set(self.observations) != set(self.actions):
            raise AgentSetMismatchError(
                "Observations and actions name different agents",
                self.observations.keys(),
                self.actions.keys(),
            )
        object.__setattr__(self, "observations", _frozen_map(self.observations))
        object.__setattr__(self, "actions", _frozen_map(self.actions))

    @classmethod
    def build(
        cls,
        state: str,
        observations: Mapping[str, str],
        actions: Mapping[str, str],
        timestep: Optional[str] = None,
        ordinal: int = 0,
    ) -> "SimulationStep":
        """Convenience constructor from plain strings."""
        return cls(
            timestep=Timestep(timestep if timestep is not None else str(ordinal), ordinal),
            state=state,
            observations={agent_id(k): ObservationExpr(v) for k, v in observations.items()},
            actions={agent_id(k): AgentAction(v) for k, v in actions.items()},
        )

    @property
    def ordinal(self) -> int:
        return self.timestep.ordinal

    @property
    def agents(self) -> tuple[AgentId, ...]:
        return tuple(self.observations)

    def with_ordinal(self, ordinal: int) -> "SimulationStep":
        if ordinal == self.timestep.ordinal:
            return self
        return replace(self, timestep=Timestep(self.timestep.raw, ordinal))

    def with_actions(self, actions: Mapping[AgentId, AgentAction]) -> "SimulationStep":
        """Copy of this step with some or all actions replaced."""
        unknown = set(actions) - set(self.actions)
        if unknown:
            raise UnknownAgentError(sorted(unknown)[0])
        merged = dict(self.actions)
        merged.update(actions)
        return replace(self, actions=merged)


@dataclass(frozen=True)
class Trajectory:
    """
    Ordered simulation steps plus the ordered agent set and optional metadata.

    Step ordinals are renumbered 0..len-1 on construction.
    """

    steps: tuple[SimulationStep, ...] = ()
    agents: tuple[AgentId, ...] = ()
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        steps = tuple(step.with_ordinal(i) for i, step in enumerate(self.steps))
        agents = tuple(self.agents)
        if len(set(agents)) != len(agents):
            raise InvalidValueError(f"Duplicate agents in {list(agents)}")
        for step in steps:
            if set(step.agents) != set(agents):
                raise AgentSetMismatchError(
                    f"Step {step.ordinal} does not match the trajectory agents",
                    agents,
                    step.agents,
                )
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "metadata", _frozen_map(self.metadata or {}))

    @classmethod
    def from_steps(
        cls, steps: Iterable[SimulationStep], metadata: Optional[Mapping[str, Any]] = None
    ) -> "Trajectory":
        """Build a trajectory whose agent order is the first step's order."""
        steps = tuple(steps)
        agents = steps[0].agents if steps else ()
        return cls(steps, agents, metadata or {})

    def __len__(self) -> int:
        return len(self.steps)

    def prefix(self, t: int) -> "Trajectory":
        return Trajectory(self.steps[:t], self.agents, self.metadata)

    def agent_index(self, agent: AgentId) -> int:
        """1-based position of `agent` in the agent order."""
        if agent not in self.agents:
            raise UnknownAgentError(agent)
        return self.agents.index(agent) + 1

    def with_metadata(self, **entries: Any) -> "Trajectory":
        merged = dict(self.metadata)
        merged.update(entries)
        return Trajectory(self.steps, self.agents, merged)
