# belief_oracle.py
"""
Deterministic symbolic social world: agents move between locations, objects move
between containers, agents make claims, and every agent keeps nested beliefs
about where objects are.

Perception rules:
- an agent perceives an event iff it is in the event's location when the event
  happens; an exiting agent still perceives its own exit;
- public claims are heard by everyone, private tells only by the recipient;
- a claim sets the listener's belief about the speaker's belief, never the
  speaker's own belief;
- co-located witnesses of an event share every belief chain among themselves
  (A thinks B thinks ... about each object in that location).

Beliefs are stored per (chain, object); a chain is a tuple of agent names with
no immediate repetition. A missing entry means "unknown".
"""

import itertools
import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from s3ap.core import InvalidValueError, S3apError
from s3ap.core.file_handling import FileHandler
from s3ap.core.input_validation import ScenarioInput, ValidationError
from s3ap.core.simulation_step import AgentAction, ObservationExpr, SimulationStep, Timestep, Trajectory, agent_id

logger = logging.getLogger(__name__)

UNKNOWN = "unknown"
DEFAULT_MAX_ORDER = 4

NAME_PATTERN = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")
RESERVED_AGENT_NAMES = frozenset({"The", "There", "In", "Inside", "A", "An", "One"})

AGENT_NAMES = (
    "Sally", "Anne", "Noah", "Mia", "Emma", "Liam", "Olivia", "Lucas", "Ava", "Ethan",
    "Chloe", "Jack", "Isla", "Owen", "Grace", "Leo", "Ruby", "Finn", "Zoe", "Adam",
)
LOCATION_NAMES = (
    "kitchen", "garden", "hallway", "attic", "garage", "office", "cellar", "porch", "study", "lounge",
)
CONTAINER_NAMES = (
    "basket", "box", "drawer", "crate", "bucket", "suitcase", "cupboard", "envelope", "bag", "jar",
    "tub", "chest",
)
OBJECT_NAMES = ("marble", "key", "scarf", "apple", "coin", "ball", "ring", "letter", "watch", "spoon")


class InvalidEventError(S3apError):
    """Raised when an event breaks the world rules at the moment it happens."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index

    def __str__(self):
        return f"{self.args[0]} (Event index: {self.index})"


class UnknownEntityError(S3apError, KeyError):
    """Raised when a query names an agent or object the scenario does not have."""

    def __init__(self, name, kind="entity"):
        super().__init__(f"Unknown {kind} '{name}'")
        self.name = name
        self.kind = kind

    def __str__(self):
        return self.args[0]


class InfeasibleParamsError(S3apError):
    """Raised when scenario generation parameters cannot be satisfied."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params

    def __str__(self):
        return f"{self.args[0]} (Params: {self.params})"


class EventKind(str, Enum):
    ENTER = "Enter"
    EXIT = "Exit"
    MOVE_OBJECT = "MoveObject"
    PUBLIC_CLAIM = "PublicClaim"
    PRIVATE_TELL = "PrivateTell"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    actor: str
    location: Optional[str] = None
    object: Optional[str] = None
    container: Optional[str] = None
    recipient: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        needed = {
            EventKind.ENTER: ("location",),
            EventKind.EXIT: ("location",),
            EventKind.MOVE_OBJECT: ("object", "container"),
            EventKind.PUBLIC_CLAIM: ("object", "container"),
            EventKind.PRIVATE_TELL: ("object", "container", "recipient"),
        }[self.kind]
        for name in needed:
            if getattr(self, name) is None:
                raise InvalidValueError(f"{self.kind.value} event needs '{name}'")

    @property
    def is_claim(self) -> bool:
        return self.kind in (EventKind.PUBLIC_CLAIM, EventKind.PRIVATE_TELL)

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value, "actor": self.actor}
        for name in ("location", "object", "container", "recipient"):
            value = getattr(self, name)
            if value is not None:
                data[name] = value
        return data


def action_text(event: Event) -> str:
    """The actor's action as it appears in a trajectory (actor name excluded)."""
    if event.kind is EventKind.ENTER:
        return f"entered the {event.location}"
    if event.kind is EventKind.EXIT:
        return f"exited the {event.location}"
    if event.kind is EventKind.MOVE_OBJECT:
        return f"moved the {event.object} to the {event.container}"
    if event.kind is EventKind.PUBLIC_CLAIM:
        return f"said publicly that the {event.object} is in the {event.container}"
    return f"privately told {event.recipient} that the {event.object} is in the {event.container}"


_ACTION_PATTERNS = (
    (EventKind.ENTER, re.compile(r"^entered the (?P<location>\S+)$")),
    (EventKind.EXIT, re.compile(r"^exited the (?P<location>\S+)$")),
    (EventKind.MOVE_OBJECT, re.compile(r"^moved the (?P<object>\S+) to the (?P<container>\S+)$")),
    (
        EventKind.PUBLIC_CLAIM,
        re.compile(r"^said publicly that the (?P<object>\S+) is in the (?P<container>\S+)$"),
    ),
    (
        EventKind.PRIVATE_TELL,
        re.compile(
            r"^privately told (?P<recipient>\S+) that the (?P<object>\S+) is in the (?P<container>\S+)$"
        ),
    ),
)


def event_from_action(actor: str, text: str) -> Optional[Event]:
    """Inverse of action_text; None when the text is not a canonical action."""
    for kind, pattern in _ACTION_PATTERNS:
        match = pattern.match(text.strip())
        if match:
            return Event(kind, actor, **match.groupdict())
    return None


@dataclass(frozen=True, eq=False)
class OracleScenario:
    """
    Locations, containers (container -> location), objects (object -> initial
    container), agents (agent -> initial location, None for outside) and events.
    Mapping order is significant: it fixes the agent order of trajectories and
    the sentence order of narratives.
    """

    locations: tuple[str, ...]
    containers: Mapping[str, str]
    objects: Mapping[str, str]
    agents: Mapping[str, Optional[str]]
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "containers", MappingProxyType(dict(self.containers)))
        object.__setattr__(self, "objects", MappingProxyType(dict(self.objects)))
        object.__setattr__(self, "agents", MappingProxyType(dict(self.agents)))
        object.__setattr__(
            self,
            "events",
            tuple(e if isinstance(e, Event) else Event(**e) for e in self.events),
        )
        self._check_names()
        self._check_references()

    def _check_names(self) -> None:
        names = [*self.locations, *self.containers, *self.objects, *self.agents]
        for name in names:
            if not isinstance(name, str) or not NAME_PATTERN.match(name):
                raise InvalidValueError(f"Scenario names must be single words, got {name!r}")
        if len(set(names)) != len(names):
            raise InvalidValueError(f"Scenario names must be distinct across kinds: {names}")
        for agent in self.agents:
            agent_id(agent)
            if agent in RESERVED_AGENT_NAMES:
                raise InvalidValueError(f"'{agent}' cannot be used as an agent name")

    def _check_references(self) -> None:
        for container, location in self.containers.items():
            if location not in self.locations:
                raise InvalidValueError(f"Container '{container}' is in unknown location '{location}'")
        for obj, container in self.objects.items():
            if container not in self.containers:
                raise InvalidValueError(f"Object '{obj}' is in unknown container '{container}'")
        for agent, location in self.agents.items():
            if location is not None and location not in self.locations:
                raise InvalidValueError(f"Agent '{agent}' starts in unknown location '{location}'")
        for i, event in enumerate(self.events):
            if event.actor not in self.agents:
                raise InvalidEventError(f"Unknown actor '{event.actor}'", i)
            if event.recipient is not None and event.recipient not in self.agents:
                raise InvalidEventError(f"Unknown recipient '{event.recipient}'", i)
            if event.location is not None and event.location not in self.locations:
                raise InvalidEventError(f"Unknown location '{event.location}'", i)
            if event.object is not None and event.object not in self.objects:
                raise InvalidEventError(f"Unknown object '{event.object}'", i)
            if event.container is not None and event.container not in self.containers:
                raise InvalidEventError(f"Unknown container '{event.container}'", i)

    def key(self) -> tuple:
        """Order-sensitive identity, used for equality."""
        return (
            self.locations,
            tuple(self.containers.items()),
            tuple(self.objects.items()),
            tuple(self.agents.items()),
            self.events,
        )

    def __eq__(self, other):
        if not isinstance(other, OracleScenario):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def with_events(self, events: Iterable[Event]) -> "OracleScenario":
        return OracleScenario(self.locations, self.containers, self.objects, self.agents, tuple(events))

    def to_dict(self) -> dict:
        return {
            "locations": list(self.locations),
            "containers": dict(self.containers),
            "objects": dict(self.objects),
            "agents": dict(self.agents),
            "events": [event.to_dict() for event in self.events],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "OracleScenario":
        return cls(
            locations=tuple(data["locations"]),
            containers=data["containers"],
            objects=data["objects"],
            agents=data["agents"],
            events=tuple(Event(**event) for event in data.get("events", ())),
        )


def load_scenario(path) -> OracleScenario:
    """
    Read a scenario file.

    Raises:
        FileHandlerError: if the file is missing or not JSON.
        InvalidValueError: if it does not describe a valid scenario.
    """
    data = FileHandler.read_json(path)
    try:
        validated = ScenarioInput.model_validate(data)
    except ValidationError as e:
        raise InvalidValueError(f"Scenario file {path} is invalid: {e}")
    return OracleScenario.from_dict(validated.model_dump())


def dump_scenario(scenario: OracleScenario, path) -> None:
    # Key order fixes agent and sentence order, so it is kept.
    FileHandler.write_json(path, scenario.to_dict(), sort_keys=False)


BeliefKey = tuple[tuple[str, ...], str]


@dataclass(frozen=True)
class WorldSnapshot:
    """
    The world after `time` events. Snapshot 0 is the initial world.

    `witnesses` are the agents that perceived the event leading here;
    `perceived` and `introspection` are each agent's external and mental
    observation of this snapshot, as written into ground-truth trajectories.
    """

    time: int
    agent_locations: Mapping[str, Optional[str]]
    placements: Mapping[str, str]
    beliefs: Mapping[BeliefKey, str]
    event_log: tuple[Event, ...]
    max_order: int = DEFAULT_MAX_ORDER
    witnesses: frozenset[str] = frozenset()
    perceived: Mapping[str, str] = field(default_factory=dict)
    introspection: Mapping[str, Optional[str]] = field(default_factory=dict)

    def belief(self, chain: Sequence[str], obj: str) -> str:
        if not chain:
            return self.placements[obj]
        return self.beliefs.get((tuple(chain), obj), UNKNOWN)

    def agents_in(self, location: str) -> list[str]:
        return [a for a, loc in self.agent_locations.items() if loc == location]


def _enumerate(names: Sequence[str]) -> str:
    if len(names) == 1:
        return names[0]
    return f"{', '.join(names[:-1])} and {names[-1]}"


def _be(names: Sequence[str]) -> str:
    return "is" if len(names) == 1 else "are"


def describe_location(scenario: OracleScenario, snapshot: WorldSnapshot, location: str) -> str:
    """State text of one location: who is there, its containers, their contents."""
    sentences = []
    present = snapshot.agents_in(location)
    if present:
        sentences.append(f"{_enumerate(present)} {_be(present)} in the {location}.")
    containers = [c for c, loc in scenario.containers.items() if loc == location]
    for container in containers:
        sentences.append(f"The {container} is in the {location}.")
    for obj in scenario.objects:
        if snapshot.placements[obj] in containers:
            sentences.append(f"The {obj} is in the {snapshot.placements[obj]}.")
    if not sentences:
        sentences.append(f"The {location} is empty.")
    return " ".join(sentences)


def describe_world(scenario: OracleScenario, snapshot: WorldSnapshot) -> str:
    parts = [describe_location(scenario, snapshot, location) for location in scenario.locations]
    outside = [a for a, loc in snapshot.agent_locations.items() if loc is None]
    if outside:
        parts.append(f"{_enumerate(outside)} {_be(outside)} outside.")
    return " ".join(parts)


def belief_chains(witnesses: Iterable[str], max_order: int) -> Iterable[tuple[str, ...]]:
    """Every chain over `witnesses` of length 1..max_order with no immediate repetition."""
    members = sorted(witnesses)
    for order in range(1, max_order + 1):
        for chain in itertools.product(members, repeat=order):
            if all(a != b for a, b in zip(chain, chain[1:])):
                yield chain


class _World:
    """Mutable simulation state; simulate() freezes it into snapshots."""

    def __init__(self, scenario: OracleScenario, max_order: int):
        self.scenario = scenario
        self.max_order = max_order
        self.locations = dict(scenario.agents)
        self.placements = dict(scenario.objects)
        self.beliefs: dict[BeliefKey, str] = {}

    def agents_in(self, location: str) -> list[str]:
        return [a for a, loc in self.locations.items() if loc == location]

    def observe(self, witnesses: Iterable[str], location: str) -> None:
        objects = [
            obj for obj, c in self.placements.items() if self.scenario.containers[c] == location
        ]
        for chain in belief_chains(witnesses, self.max_order):
            for obj in objects:
                self.beliefs[(chain, obj)] = self.placements[obj]

    def apply(self, event: Event, index: int) -> frozenset[str]:
        """Apply one event and return its witnesses."""
        where = self.locations[event.actor]
        kind = event.kind
        if kind is EventKind.ENTER:
            if where is not None:
                raise InvalidEventError(f"{event.actor} is already in the {where}", index)
            self.locations[event.actor] = event.location
            witnesses = self.agents_in(event.location)
            self.observe(witnesses, event.location)
        elif kind is EventKind.EXIT:
            if where is None:
                raise InvalidEventError(f"{event.actor} is not in any location", index)
            if event.location != where:
                raise InvalidEventError(f"{event.actor} is in the {where}, not the {event.location}", index)
            witnesses = self.agents_in(where)
            self.observe(witnesses, where)
            self.locations[event.actor] = None
        elif kind is EventKind.MOVE_OBJECT:
            current = self.placements[event.object]
            if where is None or self.scenario.containers[current] != where:
                raise InvalidEventError(f"{event.actor} is not with the {event.object}", index)
            if self.scenario.containers[event.container] != where:
                raise InvalidEventError(f"The {event.container} is not in the {where}", index)
            if event.container == current:
                raise InvalidEventError(f"The {event.object} is already in the {current}", index)
            self.placements[event.object] = event.container
            witnesses = self.agents_in(where)
            self.observe(witnesses, where)
        else:
            if kind is EventKind.PRIVATE_TELL:
                if event.recipient == event.actor:
                    raise InvalidEventError(f"{event.actor} cannot tell themselves", index)
                listeners = [event.recipient]
                witnesses = [event.actor, event.recipient]
            else:
                listeners = [a for a in self.scenario.agents if a != event.actor]
                witnesses = list(self.scenario.agents)
            if self.max_order >= 2:
                for listener in listeners:
                    self.beliefs[((listener, event.actor), event.object)] = event.container
        return frozenset(witnesses)

    def snapshot(self, time: int, witnesses: frozenset[str]) -> WorldSnapshot:
        return WorldSnapshot(
            time=time,
            agent_locations=MappingProxyType(dict(self.locations)),
            placements=MappingProxyType(dict(self.placements)),
            beliefs=MappingProxyType(dict(self.beliefs)),
            event_log=self.scenario.events[:time],
            max_order=self.max_order,
            witnesses=witnesses,
        )


def _observation_parts(
    scenario: OracleScenario, snapshot: WorldSnapshot, agent: str
) -> tuple[list[tuple[str, str]], Optional[str]]:
    """(external parts as (tag, resolved text), mental text) of `agent` at `snapshot`."""
    external: list[tuple[str, str]] = []
    agents = list(scenario.agents)
    if snapshot.time > 0 and agent in snapshot.witnesses:
        event = snapshot.event_log[-1]
        if event.actor != agent:
            tag = f"<same_as_last_action_{agents.index(event.actor) + 1} />"
            external.append((tag, f"{event.actor}: {action_text(event)}"))
    location = snapshot.agent_locations[agent]
    if location is not None:
        portion = describe_location(scenario, snapshot, location)
        world = describe_world(scenario, snapshot)
        external.append(("<same_as_state />" if portion == world else portion, portion))
    if not external:
        return [], None
    beliefs = [
        f"I believe the {obj} is in the {snapshot.beliefs[((agent,), obj)]}."
        for obj in scenario.objects
        if ((agent,), obj) in snapshot.beliefs
    ]
    return external, " ".join(beliefs) or None


def simulate(scenario: OracleScenario, max_order: int = DEFAULT_MAX_ORDER) -> list[WorldSnapshot]:
    """
    Replay the scenario's events.

    Returns:
        list[WorldSnapshot]: len(events) + 1 snapshots; snapshot k is the world
        after event k-1 (snapshot 0 is the initial world).

    Raises:
        InvalidEventError: when an event is impossible at the time it happens.
    """
    if not 1 <= max_order <= DEFAULT_MAX_ORDER:
        raise ValueError(f"max_order must be within 1..{DEFAULT_MAX_ORDER}, got {max_order}")
    world = _World(scenario, max_order)
    for location in scenario.locations:
        world.observe(world.agents_in(location), location)

    snapshots = [world.snapshot(0, frozenset())]
    for i, event in enumerate(scenario.events):
        witnesses = world.apply(event, i)
        snapshots.append(world.snapshot(i + 1, witnesses))

    finished = []
    for snapshot in snapshots:
        perceived, introspection = {}, {}
        for agent in scenario.agents:
            parts, mental = _observation_parts(scenario, snapshot, agent)
            perceived[agent] = " ".join(text for _, text in parts)
            introspection[agent] = mental
        finished.append(
            replace(
                snapshot,
                perceived=MappingProxyType(perceived),
                introspection=MappingProxyType(introspection),
            )
        )
    logger.debug(f"Simulated {len(scenario.events)} events over {len(scenario.agents)} agents")
    return finished


def query_belief(
    snapshots: Sequence[WorldSnapshot], chain: Sequence[str], obj: str, t: int
) -> str:
    """
    Belief of `chain` about `obj` at time `t`; an empty chain gives the true placement.

    Raises:
        UnknownEntityError: for an agent or object the world does not have.
        ValueError: for t out of range or a chain that repeats an agent
            immediately or is longer than the simulated order.
    """
    if not 0 <= t < len(snapshots):
        raise ValueError(f"t must be within 0..{len(snapshots) - 1}, got {t}")
    snapshot = snapshots[t]
    if obj not in snapshot.placements:
        raise UnknownEntityError(obj, "object")
    for agent in chain:
        if agent not in snapshot.agent_locations:
            raise UnknownEntityError(agent, "agent")
    chain = tuple(chain)
    if any(a == b for a, b in zip(chain, chain[1:])):
        raise ValueError(f"Belief chain repeats an agent immediately: {list(chain)}")
    if len(chain) > snapshot.max_order:
        raise ValueError(f"Belief chain longer than the simulated order {snapshot.max_order}")
    return snapshot.belief(chain, obj)


def ground_truth_trajectory(
    scenario: OracleScenario, max_order: int = DEFAULT_MAX_ORDER
) -> Trajectory:
    """
    The trajectory a faithful parser would produce for the scenario: one step per
    event plus a closing step, each holding the world before the event.
    """
    snapshots = simulate(scenario, max_order)
    agents = tuple(agent_id(a) for a in scenario.agents)
    steps = []
    for k, snapshot in enumerate(snapshots):
        observations = {}
        for agent in agents:
            parts, mental = _observation_parts(scenario, snapshot, agent)
            if not parts:
                observations[agent] = ObservationExpr("none")
                continue
            raw = " ".join(tag for tag, _ in parts)
            if mental:
                raw += f" <mental_state>{mental}</mental_state>"
            observations[agent] = ObservationExpr(raw)
        actions = {agent: AgentAction.none() for agent in agents}
        if k < len(scenario.events):
            event = scenario.events[k]
            actions[agent_id(event.actor)] = AgentAction(action_text(event))
        steps.append(
            SimulationStep(
                timestep=Timestep(str(k), k),
                state=describe_world(scenario, snapshot),
                observations=observations,
                actions=actions,
            )
        )
    return Trajectory(tuple(steps), agents, {"source": "oracle"})


# ---------------------------------------------------------------- inversion

_PEOPLE_IN = re.compile(r"^(?P<names>\S.*?) (?:is|are) in the (?P<location>\S+)$")
_PEOPLE_OUT = re.compile(r"^(?P<names>\S.*?) (?:is|are) outside$")
_THING_IN = re.compile(r"^The (?P<thing>\S+) is in the (?P<place>\S+)$")
_EMPTY = re.compile(r"^The (?P<location>\S+) is empty$")


def _split_names(names: str) -> list[str]:
    head, _, last = names.rpartition(" and ")
    return [*(n.strip() for n in head.split(",") if n.strip()), last.strip()] if head else [names.strip()]


def _sentences(text: str) -> list[str]:
    return [s.strip().rstrip(".") for s in re.split(r"(?<=\.)\s+", text.strip()) if s.strip()]


class TemplateMismatchError(S3apError):
    """Raised when text does not follow the oracle's rendering grammar."""

    def __init__(self, message, sentence=None):
        super().__init__(message)
        self.sentence = sentence

    def __str__(self):
        if self.sentence is None:
            return self.args[0]
        return f"{self.args[0]} (Sentence: {self.sentence!r})"


def scenario_from_trajectory(traj: Trajectory) -> OracleScenario:
    """
    Rebuild the scenario behind a ground-truth style trajectory: the initial
    world from the first state, the events from the actions.

    Raises:
        TemplateMismatchError: when the state or an action is not in oracle form.
    """
    if not traj.steps:
        raise TemplateMismatchError("Trajectory has no steps")
    locations: list[str] = []
    containers: dict[str, str] = {}
    objects: dict[str, str] = {}
    agents: dict[str, Optional[str]] = {a: None for a in traj.agents}

    def add_location(name):
        if name not in locations:
            locations.append(name)

    for sentence in _sentences(traj.steps[0].state):
        if match := _EMPTY.match(sentence):
            add_location(match["location"])
        elif match := _THING_IN.match(sentence):
            thing, place = match["thing"], match["place"]
            if place in containers:
                objects[thing] = place
            else:
                add_location(place)
                containers[thing] = place
        elif match := _PEOPLE_OUT.match(sentence):
            for name in _split_names(match["names"]):
                if name not in agents:
                    raise TemplateMismatchError(f"Unknown agent '{name}'", sentence)
        elif match := _PEOPLE_IN.match(sentence):
            add_location(match["location"])
            for name in _split_names(match["names"]):
                if name not in agents:
                    raise TemplateMismatchError(f"Unknown agent '{name}'", sentence)
                agents[name] = match["location"]
        else:
            raise TemplateMismatchError("State sentence is not in oracle form", sentence)

    events = []
    for step in traj.steps:
        acting = [(a, act) for a, act in step.actions.items() if not act.is_none]
        if len(acting) > 1:
            raise TemplateMismatchError(f"Step {step.ordinal} has more than one actor")
        if acting:
            actor, action = acting[0]
            event = event_from_action(actor, action.raw)
            if event is None:
                raise TemplateMismatchError("Action is not in oracle form", action.raw)
            events.append(event)
    try:
        return OracleScenario(tuple(locations), containers, objects, agents, tuple(events))
    except (InvalidValueError, InvalidEventError) as e:
        raise TemplateMismatchError(f"Trajectory does not describe a valid scenario: {e}")


# ---------------------------------------------------------------- generation


@dataclass(frozen=True)
class ScenarioParams:
    n_agents: int = 2
    n_locations: int = 1
    n_containers: int = 2
    n_objects: int = 1
    n_events: int = 4
    force_false_belief: bool = False
    allow_claims: bool = True

    def check(self) -> None:
        for name, pool in (
            ("n_agents", AGENT_NAMES),
            ("n_locations", LOCATION_NAMES),
            ("n_containers", CONTAINER_NAMES),
            ("n_objects", OBJECT_NAMES),
        ):
            value = getattr(self, name)
            if not 1 <= value <= len(pool):
                raise InfeasibleParamsError(f"{name} must be within 1..{len(pool)}", self)
        if self.n_events < 0:
            raise InfeasibleParamsError("n_events must be >= 0", self)
        if self.force_false_belief and (
            self.n_agents < 2 or self.n_containers < 2 or self.n_events < 2
        ):
            raise InfeasibleParamsError(
                "A false belief needs at least 2 agents, 2 containers and 2 events", self
            )


REJECTION_ATTEMPTS = 50


def _pick(rng: np.random.Generator, pool: Sequence[str], n: int) -> list[str]:
    return [pool[i] for i in sorted(rng.choice(len(pool), size=n, replace=False))]


def _feasible_events(world: _World, allow_claims: bool) -> list[Event]:
    scenario = world.scenario
    events = []
    for agent, where in world.locations.items():
        if where is None:
            events.extend(Event(EventKind.ENTER, agent, location=loc) for loc in scenario.locations)
            continue
        events.append(Event(EventKind.EXIT, agent, location=where))
        for obj, current in world.placements.items():
            if scenario.containers[current] != where:
                continue
            for container, loc in scenario.containers.items():
                if loc == where and container != current:
                    events.append(Event(EventKind.MOVE_OBJECT, agent, object=obj, container=container))
    if allow_claims:
        for agent in scenario.agents:
            for obj in scenario.objects:
                for container in scenario.containers:
                    events.append(Event(EventKind.PUBLIC_CLAIM, agent, object=obj, container=container))
                    for other in scenario.agents:
                        if other != agent:
                            events.append(
                                Event(EventKind.PRIVATE_TELL, agent, object=obj, container=container, recipient=other)
                            )
    return events


def _sample(rng: np.random.Generator, params: ScenarioParams) -> OracleScenario:
    agents = _pick(rng, AGENT_NAMES, params.n_agents)
    locations = _pick(rng, LOCATION_NAMES, params.n_locations)
    containers = {
        c: locations[int(rng.integers(len(locations)))]
        for c in _pick(rng, CONTAINER_NAMES, params.n_containers)
    }
    container_names = list(containers)
    objects = {
        o: container_names[int(rng.integers(len(container_names)))]
        for o in _pick(rng, OBJECT_NAMES, params.n_objects)
    }
    starts = {
        a: None if rng.random() < 0.2 else locations[int(rng.integers(len(locations)))]
        for a in agents
    }
    scenario = OracleScenario(tuple(locations), containers, objects, starts)

    # Claims are drawn less often than physical events.
    world = _World(scenario, 1)
    events = []
    for i in range(params.n_events):
        candidates = _feasible_events(world, params.allow_claims and rng.random() < 0.25)
        event = candidates[int(rng.integers(len(candidates)))]
        world.apply(event, i)
        events.append(event)
    return scenario.with_events(events)


def has_false_belief(scenario: OracleScenario) -> bool:
    """True when some agent ends up believing an object is where it is not."""
    final = simulate(scenario, max_order=1)[-1]
    return any(
        final.beliefs.get(((agent,), obj), UNKNOWN) not in (UNKNOWN, final.placements[obj])
        for agent in scenario.agents
        for obj in scenario.objects
    )


def _false_belief_construction(rng: np.random.Generator, params: ScenarioParams) -> OracleScenario:
    agents = _pick(rng, AGENT_NAMES, params.n_agents)
    locations = _pick(rng, LOCATION_NAMES, params.n_locations)
    names = _pick(rng, CONTAINER_NAMES, params.n_containers)
    containers = {names[0]: locations[0], names[1]: locations[0]}
    for c in names[2:]:
        containers[c] = locations[int(rng.integers(len(locations)))]
    objects = {o: names[0] for o in _pick(rng, OBJECT_NAMES, params.n_objects)}
    target = next(iter(objects))
    leaver, mover = agents[0], agents[1]
    events = [
        Event(EventKind.PUBLIC_CLAIM, mover, object=target, container=names[0])
        for _ in range(params.n_events - 2)
    ]
    events.append(Event(EventKind.EXIT, leaver, location=locations[0]))
    events.append(Event(EventKind.MOVE_OBJECT, mover, object=target, container=names[1]))
    return OracleScenario(tuple(locations), containers, objects, {a: locations[0] for a in agents}, tuple(events))


def generate_scenario(seed: int, params: ScenarioParams = ScenarioParams()) -> OracleScenario:
    """
    Seeded scenario generator.

    With `force_false_belief`, random scenarios are drawn until one leaves an
    agent with a false first-order belief; after REJECTION_ATTEMPTS draws a
    constructed scenario (one agent leaves, another moves the object) is used.

    Raises:
        InfeasibleParamsError: for parameters outside the supported ranges.
    """
    params.check()
    rng = np.random.default_rng(seed)
    if not params.force_false_belief:
        return _sample(rng, params)
    for _ in range(REJECTION_ATTEMPTS):
        scenario = _sample(rng, params)
        if has_false_belief(scenario):
            return scenario
    logger.debug(f"Seed {seed}: no false belief by sampling, using the constructed scenario")
    return _false_belief_construction(rng, params)


# ---------------------------------------------------------------- questions


@dataclass(frozen=True)
class BeliefQuestion:
    chain: tuple[str, ...]
    object: str
    options: tuple[str, ...]
    gold_index: int

    @property
    def text(self) -> str:
        return question_text(self.chain, self.object)

    @property
    def order(self) -> int:
        return len(self.chain)


def question_text(chain: Sequence[str], obj: str) -> str:
    if not chain:
        return f"Where is the {obj} really?"
    head, *rest = chain
    nested = "".join(f"{agent} thinks " for agent in rest)
    return f"Where does {head} think {nested}the {obj} is?"


_QUESTION = re.compile(r"Where (?:is the (?P<real>\S+) really|does (?P<chain>.+?) the (?P<obj>\S+) is)\?")


def parse_question(text: str) -> Optional[tuple[tuple[str, ...], str]]:
    """Inverse of question_text: (chain, object), or None for other questions."""
    match = _QUESTION.search(text)
    if match is None:
        return None
    if match["real"]:
        return (), match["real"]
    words = match["chain"].split(" ")
    if len(words) % 2 or words[1] != "think" or any(w != "thinks" for w in words[3::2]):
        return None
    return tuple(words[0::2]), match["obj"]


def generate_questions(
    scenario: OracleScenario,
    rng: np.random.Generator,
    per_scenario: int = 4,
    max_order: int = 3,
) -> list[BeliefQuestion]:
    """
    Reality, first-order and higher-order belief questions about the end of the
    story, answered by the oracle. Options are the containers plus "unknown".
    """
    snapshots = simulate(scenario)
    final = len(snapshots) - 1
    agents = list(scenario.agents)
    candidates = [((), obj) for obj in scenario.objects]
    for order in range(1, max_order + 1):
        for chain in itertools.product(agents, repeat=order):
            if all(a != b for a, b in zip(chain, chain[1:])):
                candidates.extend((chain, obj) for obj in scenario.objects)
    count = min(per_scenario, len(candidates))
    picked = sorted(rng.choice(len(candidates), size=count, replace=False))
    options = (*scenario.containers, UNKNOWN)
    questions = []
    for index in picked:
        chain, obj = candidates[index]
        answer = query_belief(snapshots, chain, obj, final)
        questions.append(BeliefQuestion(tuple(chain), obj, options, options.index(answer)))
    return questions
