# agent_memory.py
"""
Per-agent memory reconstruction: the agent's resolved observations and actions
for every timestep before t, observation first within a timestep.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

from s3ap.core import AgentSetMismatchError, UnknownAgentError
from s3ap.core.simulation_step import (
    AgentAction,
    AgentId,
    ResolvedObservation,
    SimulationStep,
    Trajectory,
)
from s3ap.core.special_tags import resolve_tags

logger = logging.getLogger(__name__)


class MemoryKind(str, Enum):
    OBSERVATION = "observation"
    ACTION = "action"


@dataclass(frozen=True)
class MemoryEntry:
    ordinal: int
    kind: MemoryKind
    value: Union[ResolvedObservation, AgentAction]

    def render(self) -> str:
        if self.kind is MemoryKind.ACTION:
            return f"[t={self.ordinal}] I did: {self.value.raw}"
        return f"[t={self.ordinal}] I observed: {self.value.render()}"


@dataclass(frozen=True)
class AgentMemory:
    """The memory of `owner` before timestep `upto`."""

    owner: AgentId
    upto: int
    entries: tuple[MemoryEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def is_prefix_of(self, other: "AgentMemory") -> bool:
        return (
            self.owner == other.owner
            and len(self.entries) <= len(other.entries)
            and other.entries[: len(self.entries)] == self.entries
        )

    def render(self) -> str:
        if not self.entries:
            return "(no memories yet)"
        return "\n".join(entry.render() for entry in self.entries)


def _check_agent(traj: Trajectory, agent: AgentId) -> None:
    if agent not in traj.agents:
        raise UnknownAgentError(agent)


def reconstruct_memory(traj: Trajectory, agent: AgentId, t: int) -> AgentMemory:
    """
    Build the memory of `agent` at timestep `t`.

    Null observations and actions are kept, so the memory always holds 2t entries.

    Raises:
        UnknownAgentError: if `agent` is not in the trajectory.
        ValueError: if `t` is outside 0..len(traj).
    """
    _check_agent(traj, agent)
    if not 0 <= t <= len(traj.steps):
        raise ValueError(f"t must be within 0..{len(traj.steps)}, got {t}")

    entries = []
    for step in traj.steps[:t]:
        observation = resolve_tags(step, traj, agent)
        entries.append(MemoryEntry(step.ordinal, MemoryKind.OBSERVATION, observation))
        entries.append(MemoryEntry(step.ordinal, MemoryKind.ACTION, step.actions[agent]))
    return AgentMemory(owner=agent, upto=t, entries=tuple(entries))


def agent_view(
    traj: Trajectory, agent: AgentId, t: int
) -> tuple[AgentMemory, ResolvedObservation]:
    """The (memory, current observation) pair a policy consumes at timestep t."""
    _check_agent(traj, agent)
    if not 0 <= t < len(traj.steps):
        raise ValueError(f"t must be within 0..{len(traj.steps) - 1}, got {t}")
    memory = reconstruct_memory(traj, agent, t)
    return memory, resolve_tags(traj.steps[t], traj, agent)


def append_step(traj: Trajectory, step: SimulationStep) -> Trajectory:
    """Return a new trajectory with `step` appended and its ordinal normalized."""
    if traj.agents and set(step.agents) != set(traj.agents):
        raise AgentSetMismatchError(
            "Appended step does not match the trajectory agents", traj.agents, step.agents
        )
    agents = traj.agents or step.agents
    new_step = step.with_ordinal(len(traj.steps))
    logger.debug(f"Appending step {new_step.ordinal} ({len(agents)} agents)")
    return Trajectory(traj.steps + (new_step,), agents, traj.metadata)
