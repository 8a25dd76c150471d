# init.py
""" init file for the core package. """


class S3apError(Exception):
    """Root of every error raised by the s3ap toolkit."""


class InvalidValueError(S3apError, ValueError):
    """Raised when a domain value breaks one of its invariants."""


class MalformedTagError(S3apError):
    """Raised when an observation or state holds a special tag that does not parse."""

    def __init__(self, message, text=None):
        super().__init__(message)
        self.text = text

    def __str__(self):
        if self.text is None:
            return self.args[0]
        return f"{self.args[0]} (in: {self.text!r})"


class TagAtOriginError(S3apError):
    """Raised when a last-action tag is used at the first timestep."""

    def __init__(self, message, agent=None):
        super().__init__(message)
        self.agent = agent

    def __str__(self):
        return f"{self.args[0]} (Agent: {self.agent})"


class UnknownAgentIndexError(S3apError):
    """Raised when `<same_as_last_action_x />` points past the agent list."""

    def __init__(self, message, index, agent_count):
        super().__init__(message)
        self.index = index
        self.agent_count = agent_count

    def __str__(self):
        return f"{self.args[0]} (index: {self.index}, agents: {self.agent_count})"


class UnknownAgentError(S3apError, KeyError):
    """Raised when an agent is not part of the trajectory."""

    def __init__(self, agent):
        super().__init__(f"Unknown agent '{agent}'")
        self.agent = agent

    def __str__(self):
        return self.args[0]


class AgentSetMismatchError(S3apError):
    """Raised when a step's agents differ from the trajectory's agents."""

    def __init__(self, message, expected=(), found=()):
        super().__init__(message)
        self.expected = tuple(expected)
        self.found = tuple(found)

    def __str__(self):
        return (
            f"{self.args[0]} (expected: {list(self.expected)}, "
            f"found: {list(self.found)})"
        )


from .simulation_step import (
    AgentAction,
    AgentId,
    ObservationExpr,
    ResolvedObservation,
    SimulationStep,
    Timestep,
    Trajectory,
    agent_id,
)
from .special_tags import resolve_state, resolve_tags
from .agent_memory import AgentMemory, MemoryEntry, agent_view, append_step, reconstruct_memory
