# toy_environments.py
"""
Small interactive environments with exact transitions and scripted partners,
used to measure goal completion of agents.

Each turn is one round in which the agents move in their listed order, the ego
first, and later moves answer earlier ones (in the negotiation the buyer bids
and the seller replies). The world after a round is a deterministic function
of the world before it and the moves made. The
trajectory of an episode is written in S3AP form: one step per world, the last
step holding pending "none" actions.

Environments:
- NegotiationEnv: a buyer haggles with a scripted seller (competitive).
- MutualFriendsEnv: two agents look for the friends they share (cooperative).
"""

import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from s3ap.core import S3apError
from s3ap.core.action_space import ActionSpace, Goal, GoalScore, action_object
from s3ap.core.file_handling import FileHandler, FileHandlerError
from s3ap.core.input_validation import (
    EnvironmentInput,
    MutualFriendsInput,
    NegotiationInput,
    NegotiationTerms,
    validate_environment,
)
from s3ap.core.simulation_step import AgentAction, AgentId, SimulationStep, Trajectory, agent_id

logger = logging.getLogger(__name__)

NONE = AgentAction.none()


class EnvRuleError(S3apError):
    """Raised when an action breaks the rules of an environment."""

    def __init__(self, message, agent=None, action=None):
        super().__init__(message)
        self.agent = agent
        self.action = action

    def __str__(self):
        if self.agent is None:
            return self.args[0]
        return f"{self.args[0]} (Agent: {self.agent}, Action: {self.action!r})"


class EnvironmentDefinitionError(S3apError):
    """Raised when an environment definition cannot be found or does not validate."""

    def __init__(self, message, source=None):
        super().__init__(message)
        self.source = source

    def __str__(self):
        return f"{self.args[0]} (Source: {self.source})"


def _argument(action: AgentAction, verb: str) -> Optional[str]:
    """Argument of `action` when it reads '<verb> <argument>', else None."""
    obj = action_object(action)
    if obj["action_type"] != verb:
        return None
    return obj["argument"]


def _price(action: AgentAction, verb: str) -> Optional[int]:
    argument = _argument(action, verb)
    if argument is None:
        return None
    try:
        return int(argument)
    except ValueError:
        return None


class ToyEnvironment(ABC):
    """Base class of the toy environments."""

    kind: str

    def __init__(self, name: str, agents: Sequence[str], ego: str, max_turns: int, seed: Optional[int]):
        self.name = name
        self.agents: tuple[AgentId, ...] = tuple(agent_id(a) for a in agents)
        self.ego = agent_id(ego)
        self.max_turns = max_turns
        self.seed = seed

    @property
    def partners(self) -> tuple[AgentId, ...]:
        return tuple(a for a in self.agents if a != self.ego)

    @abstractmethod
    def reset(self) -> Any: ...

    @abstractmethod
    def is_terminal(self, world) -> bool: ...

    @abstractmethod
    def action_space(self, agent: AgentId) -> ActionSpace: ...

    @abstractmethod
    def transition(self, world, actions: Mapping[AgentId, AgentAction]) -> Any: ...

    @abstractmethod
    def state_text(self, world) -> str: ...

    @abstractmethod
    def observation(self, world, agent: AgentId) -> str: ...

    @abstractmethod
    def scores(self, world) -> dict[AgentId, GoalScore]: ...

    @abstractmethod
    def scripted_action(self, world, agent: AgentId) -> AgentAction:
        """Default behaviour of `agent`: the myopic ego or the scripted partner."""

    @abstractmethod
    def goal(self, agent: AgentId) -> Goal: ...

    @abstractmethod
    def refiner(self, agent: AgentId) -> "EnvRefiner": ...

    def step_for(self, world) -> SimulationStep:
        """Trajectory step of `world`, with every action pending."""
        return SimulationStep.build(
            state=self.state_text(world),
            observations={agent: self.observation(world, agent) for agent in self.agents},
            actions={agent: NONE.raw for agent in self.agents},
            timestep=f"turn {world.turn + 1}",
        )

    def initial_trajectory(self) -> Trajectory:
        metadata = {"env": self.name, "seed": self.seed}
        return Trajectory((self.step_for(self.reset()),), self.agents, metadata)

    def replay(self, traj: Trajectory):
        """
        World at the last step of `traj`, replaying every committed step.

        Raises:
            EnvRuleError: when the trajectory does not follow this environment.
        """
        if set(traj.agents) != set(self.agents):
            raise EnvRuleError(f"Trajectory agents {list(traj.agents)} do not match {self.name}")
        world = self.reset()
        for step in traj.steps[:-1]:
            world = self.transition(world, step.actions)
        if traj.steps and traj.steps[-1].state != self.state_text(world):
            raise EnvRuleError(f"Trajectory state does not follow the {self.name} rules")
        return world

    def check_legal(self, agent: AgentId, action: AgentAction) -> None:
        if not self.action_space(agent).contains(action):
            raise EnvRuleError("Action is outside the agent's action space", agent, action.raw)

    def describe(self) -> dict:
        return {"env": self.name, "kind": self.kind, "seed": self.seed, "agents": list(self.agents)}


class EnvPolicy:
    """Policy that plays an environment's default behaviour for one agent."""

    def __init__(self, env: ToyEnvironment, agent: str):
        self.env = env
        self.agent = agent_id(agent)

    def sample(self, space: ActionSpace, state: Trajectory, goal: Goal) -> AgentAction:
        return self.env.scripted_action(self.env.replay(state), self.agent)

    def __repr__(self):
        return f"EnvPolicy({self.env.name!r}, {self.agent!r})"


class EnvRefiner(ABC):
    """Scripted refiner that reads simulated steps written by its environment."""

    def __init__(self, env: ToyEnvironment, agent: str):
        self.env = env
        self.agent = agent_id(agent)

    @abstractmethod
    def better_action(self, world, sim_states: Sequence[SimulationStep]) -> Optional[AgentAction]: ...

    def refine(self, space, sim_states, original_state, goal, intended) -> AgentAction:
        world = self.env.replay(original_state)
        action = self.better_action(world, sim_states)
        if action is not None and space.contains(action):
            return action
        if not intended.is_none and space.contains(intended):
            return intended
        return self.env.scripted_action(world, self.agent)


# ---------------------------------------------------------------- negotiation


@dataclass(frozen=True)
class NegotiationWorld:
    turn: int
    ask: int
    rejections: int = 0
    deal: Optional[int] = None
    walked_away: bool = False
    last_counter: Optional[int] = None


class NegotiationEnv(ToyEnvironment):
    """
    The buyer (ego) haggles over one item with a scripted seller.

    Each turn the buyer accepts the standing ask or offers a price, and the
    seller replies with its next ask (never below its reservation price) or
    walks away once it has rejected `patience` rounds. A deal only closes at
    the seller's price: on an accept, or on an offer at or above the standing
    ask. A lower offer is answered by the counter, which becomes the new ask.
    """

    kind = "negotiation"

    def __init__(self, spec: NegotiationInput, terms: Optional[NegotiationTerms] = None, seed: Optional[int] = None):
        super().__init__(spec.name, (spec.buyer, spec.seller), spec.buyer, spec.max_turns, seed)
        self.spec = spec
        self.terms = terms or spec.defaults
        self.buyer = agent_id(spec.buyer)
        self.seller = agent_id(spec.seller)
        self.prices = spec.price_grid.prices()

    @classmethod
    def for_seed(cls, spec: NegotiationInput, seed: int) -> "NegotiationEnv":
        """Seeded suite member; every `conceder_every`-th seed gets a conceding seller."""
        rng = np.random.default_rng(seed)
        step = spec.price_grid.step
        reservation = step * int(rng.integers(8, 13))
        span = step * int(rng.integers(4, 9))
        value = reservation + span
        opening_ask = reservation + step * int(rng.integers(1, span // step + 1))
        concession = step * int(rng.integers(1, 4)) if seed % spec.conceder_every == 0 else 0
        patience = int(rng.integers(1, 4))
        terms = NegotiationTerms(
            value=value,
            reservation=reservation,
            opening_ask=opening_ask,
            concession=concession,
            patience=patience,
        )
        return cls(spec, terms, seed)

    def reset(self) -> NegotiationWorld:
        return NegotiationWorld(turn=0, ask=self.terms.opening_ask)

    def is_terminal(self, world: NegotiationWorld) -> bool:
        return world.deal is not None or world.walked_away or world.turn >= self.max_turns

    def action_space(self, agent: AgentId) -> ActionSpace:
        if agent == self.buyer:
            return ActionSpace.enumerated(["accept", *(f"offer {p}" for p in self.prices)])
        return ActionSpace.enumerated([*(f"ask {p}" for p in self.prices), "walk away"])

    def next_ask(self, world: NegotiationWorld) -> int:
        return max(self.terms.reservation, world.ask - self.terms.concession)

    def transition(self, world: NegotiationWorld, actions) -> NegotiationWorld:
        if self.is_terminal(world):
            return world
        bid = actions.get(self.buyer, NONE)
        response = actions.get(self.seller, NONE)
        walks = _argument(response, "walk") == "away"
        counter = _price(response, "ask")
        if counter is None:
            counter = world.ask
        turn = world.turn + 1

        offer = _price(bid, "offer")
        if _argument(bid, "accept") is not None or (offer is not None and offer >= world.ask):
            return replace(world, turn=turn, deal=world.ask, last_counter=None if walks else counter)
        if walks:
            return replace(world, turn=turn, walked_away=True, last_counter=None)
        return replace(world, turn=turn, ask=counter, rejections=world.rejections + 1, last_counter=counter)

    def state_text(self, world: NegotiationWorld) -> str:
        item = self.spec.item
        if world.deal is not None:
            return f"The {item} was sold for {world.deal}."
        if world.walked_away:
            return f"The seller walked away. The {item} was not sold."
        if world.turn >= self.max_turns:
            return f"Time ran out. The {item} was not sold."
        return f"The seller asks {world.ask} for the {item}."

    def observation(self, world: NegotiationWorld, agent: AgentId) -> str:
        if agent == self.buyer:
            mental = f"The {self.spec.item} is worth {self.terms.value} to me."
        elif world.deal is not None:
            mental = (
                f"I would have settled for {world.last_counter}."
                if world.last_counter is not None
                else "I was about to walk away."
            )
        elif self.is_terminal(world):
            mental = "The negotiation is over."
        elif world.rejections >= self.terms.patience:
            mental = "I will walk away unless the buyer accepts now."
        else:
            mental = f"I am willing to settle near {world.ask}."
        return f"<same_as_state /> <mental_state>{mental}</mental_state>"

    def scores(self, world: NegotiationWorld) -> dict[AgentId, GoalScore]:
        if world.deal is None:
            no_deal = GoalScore(self.spec.no_deal_score)
            return {self.buyer: no_deal, self.seller: no_deal}
        span = self.terms.value - self.terms.reservation
        return {
            self.buyer: GoalScore.clipped(10 * (self.terms.value - world.deal) / span),
            self.seller: GoalScore.clipped(10 * (world.deal - self.terms.reservation) / span),
        }

    def scripted_action(self, world: NegotiationWorld, agent: AgentId) -> AgentAction:
        if self.is_terminal(world):
            return NONE
        if agent == self.buyer:
            if world.ask <= self.terms.value:
                return AgentAction("accept")
            return AgentAction(f"offer {max(p for p in self.prices if p <= self.terms.value)}")
        if world.rejections >= self.terms.patience:
            return AgentAction("walk away")
        return AgentAction(f"ask {self.next_ask(world)}")

    def goal(self, agent: AgentId) -> Goal:
        text = self.spec.goals[agent].format(item=self.spec.item, **self.terms.model_dump())
        scorer = "buyer_surplus" if agent == self.buyer else "seller_surplus"
        return Goal(text, scorer)

    def refiner(self, agent: AgentId) -> "NegotiationRefiner":
        return NegotiationRefiner(self, agent)

    def optimal_score(self) -> GoalScore:
        """Best buyer score against the scripted seller, by exhaustive search."""
        bids = [NONE, *self.action_space(self.buyer).options]

        @lru_cache(maxsize=None)
        def best(world: NegotiationWorld) -> float:
            if self.is_terminal(world):
                return self.scores(world)[self.buyer].value
            response = self.scripted_action(world, self.seller)
            return max(
                best(self.transition(world, {self.buyer: bid, self.seller: response}))
                for bid in bids
            )

        return GoalScore(best(self.reset()))

    def describe(self) -> dict:
        return {**super().describe(), "terms": self.terms.model_dump()}


class NegotiationRefiner(EnvRefiner):
    """
    Offers the seller's predicted price for this round when it is below the
    standing ask. On the last turn only an accept can still close a deal.
    """

    _ASK = re.compile(r"The seller asks (\d+)")
    _SETTLE = re.compile(r"I would have settled for (\d+)")

    def predicted_floor(self, sim_states: Sequence[SimulationStep]) -> Optional[int]:
        if not sim_states:
            return None
        step = sim_states[0]
        if match := self._ASK.search(step.state):
            return int(match.group(1))
        seller = step.observations.get(self.env.seller)
        if seller is not None and (match := self._SETTLE.search(seller.raw)):
            return int(match.group(1))
        return None

    def better_action(self, world, sim_states) -> Optional[AgentAction]:
        if self.env.is_terminal(world):
            return None
        if world.turn + 1 >= self.env.max_turns:
            return None
        floor = self.predicted_floor(sim_states)
        if floor is None or floor >= world.ask:
            return None
        return AgentAction(f"offer {floor}")


# ---------------------------------------------------------------- mutual friends


@dataclass(frozen=True)
class MutualFriendsWorld:
    turn: int
    mentions: tuple[tuple[str, ...], ...]


class MutualFriendsEnv(ToyEnvironment):
    """
    Two agents hold private friend lists. Each round the seeker names a friend
    and then the partner does. A friend counts as found once both have named
    it. Both agents get the same score: the found fraction of their mutual
    friends.

    The partner reads its list out in order; the seeker (ego) decides freely.
    """

    kind = "mutual_friends"

    def __init__(
        self,
        spec: MutualFriendsInput,
        friends: Optional[Mapping[str, Sequence[str]]] = None,
        seed: Optional[int] = None,
    ):
        super().__init__(spec.name, (spec.seeker, spec.partner), spec.seeker, spec.max_turns, seed)
        self.spec = spec
        lists = friends or spec.defaults
        self.friends: dict[AgentId, tuple[str, ...]] = {a: tuple(lists[a]) for a in self.agents}
        self.mutual = frozenset(self.friends[self.agents[0]]) & frozenset(self.friends[self.agents[1]])
        if not self.mutual:
            raise EnvRuleError("Friend lists share no mutual friend")

    @classmethod
    def for_seed(cls, spec: MutualFriendsInput, seed: int) -> "MutualFriendsEnv":
        rng = np.random.default_rng(seed)
        own = spec.list_size - spec.mutual_size
        picked = [spec.name_pool[i] for i in rng.choice(len(spec.name_pool), 2 * own + spec.mutual_size, replace=False)]
        mutual, seeker_only, partner_only = (
            picked[: spec.mutual_size],
            picked[spec.mutual_size : spec.mutual_size + own],
            picked[spec.mutual_size + own :],
        )
        lists = {}
        for agent, names in ((spec.seeker, mutual + seeker_only), (spec.partner, mutual + partner_only)):
            lists[agent] = [names[i] for i in rng.permutation(len(names))]
        return cls(spec, lists, seed)

    def _index(self, agent: AgentId) -> int:
        return self.agents.index(agent)

    def found(self, world: MutualFriendsWorld) -> list[str]:
        """Found friends in the seeker's list order."""
        both = set(world.mentions[0]) & set(world.mentions[1])
        return [name for name in self.friends[self.ego] if name in both]

    def reset(self) -> MutualFriendsWorld:
        return MutualFriendsWorld(turn=0, mentions=tuple(() for _ in self.agents))

    def is_terminal(self, world: MutualFriendsWorld) -> bool:
        return len(self.found(world)) == len(self.mutual) or world.turn >= self.max_turns

    def action_space(self, agent: AgentId) -> ActionSpace:
        return ActionSpace.enumerated([f"mention {name}" for name in self.friends[agent]])

    def transition(self, world: MutualFriendsWorld, actions) -> MutualFriendsWorld:
        if self.is_terminal(world):
            return world
        mentions = list(world.mentions)
        for i, agent in enumerate(self.agents):
            name = _argument(actions.get(agent, NONE), "mention")
            if name in self.friends[agent] and name not in mentions[i]:
                mentions[i] = mentions[i] + (name,)
        return MutualFriendsWorld(turn=world.turn + 1, mentions=tuple(mentions))

    def state_text(self, world: MutualFriendsWorld) -> str:
        sentences = []
        for agent, names in zip(self.agents, world.mentions):
            if names:
                sentences.append(f"{agent} has mentioned: {', '.join(names)}.")
            else:
                sentences.append(f"{agent} has not mentioned anyone yet.")
        found = self.found(world)
        if found:
            sentences.append(f"Mutual friends found: {', '.join(found)}.")
        else:
            sentences.append("No mutual friend found yet.")
        if len(found) == len(self.mutual):
            sentences.append("All mutual friends are found.")
        elif world.turn >= self.max_turns:
            sentences.append("Time is up.")
        return " ".join(sentences)

    def observation(self, world: MutualFriendsWorld, agent: AgentId) -> str:
        friends = ", ".join(self.friends[agent])
        return f"<same_as_state /> <mental_state>My friends are {friends}.</mental_state>"

    def scores(self, world: MutualFriendsWorld) -> dict[AgentId, GoalScore]:
        shared = GoalScore.clipped(10 * len(self.found(world)) / len(self.mutual))
        return {agent: shared for agent in self.agents}

    def scripted_action(self, world: MutualFriendsWorld, agent: AgentId) -> AgentAction:
        if self.is_terminal(world):
            return NONE
        mine = world.mentions[self._index(agent)]
        if agent == self.ego:
            theirs = world.mentions[1 - self._index(agent)]
            for name in theirs:
                if name in self.friends[agent] and name not in mine:
                    return AgentAction(f"mention {name}")
        for name in self.friends[agent]:
            if name not in mine:
                return AgentAction(f"mention {name}")
        return NONE

    def goal(self, agent: AgentId) -> Goal:
        other = next(a for a in self.agents if a != agent)
        text = self.spec.goals[agent].format(partner=other, friends=", ".join(self.friends[agent]))
        return Goal(text, "shared_found_fraction")

    def refiner(self, agent: AgentId) -> "MutualFriendsRefiner":
        return MutualFriendsRefiner(self, agent)

    def optimal_score(self) -> GoalScore:
        """Best shared score: every mutual friend the partner names in time gets found."""
        partner = self.partners[0]
        named = self.friends[partner][: self.max_turns]
        return GoalScore.clipped(10 * len(self.mutual.intersection(named)) / len(self.mutual))

    def describe(self) -> dict:
        return {**super().describe(), "friends": {a: list(f) for a, f in self.friends.items()}}


class MutualFriendsRefiner(EnvRefiner):
    """Names the earliest friend the partner has named, or is predicted to name, first."""

    def partner_mentions(self, step: SimulationStep, partner: AgentId) -> list[str]:
        match = re.search(rf"(?:^|\. ){re.escape(partner)} has mentioned: ([^.]*)\.", step.state)
        return match.group(1).split(", ") if match else []

    def better_action(self, world, sim_states) -> Optional[AgentAction]:
        if self.env.is_terminal(world) or not sim_states:
            return None
        partner = next(a for a in self.env.agents if a != self.agent)
        mine = world.mentions[self.env._index(self.agent)]
        for name in self.partner_mentions(sim_states[0], partner):
            if name in self.env.friends[self.agent] and name not in mine:
                return AgentAction(f"mention {name}")
        return None


# ---------------------------------------------------------------- loading


ENVIRONMENT_CLASSES = {"negotiation": NegotiationEnv, "mutual_friends": MutualFriendsEnv}


def available_environments() -> tuple[str, ...]:
    folder = resources.files("s3ap.assets").joinpath("environments")
    return tuple(sorted(e.name.removesuffix(".json") for e in folder.iterdir() if e.name.endswith(".json")))


def load_environment_spec(name_or_path: str | Path) -> EnvironmentInput:
    """
    Definition of a packaged environment (by name) or of a JSON file (by path).

    Raises:
        EnvironmentDefinitionError: for an unknown name, an unreadable file or
            a definition that does not validate.
    """
    path = Path(name_or_path)
    try:
        if path.suffix == ".json" or path.is_file():
            data = FileHandler.read_json(path)
        else:
            asset = resources.files("s3ap.assets").joinpath("environments", f"{name_or_path}.json")
            if not asset.is_file():
                raise EnvironmentDefinitionError(
                    f"Unknown environment; available: {', '.join(available_environments())}", name_or_path
                )
            data = FileHandler.read_json(Path(str(asset)))
        return validate_environment(data)
    except FileHandlerError as e:
        raise EnvironmentDefinitionError(str(e), name_or_path)
    except (ValidationError, ValueError) as e:
        raise EnvironmentDefinitionError(f"Invalid environment definition: {e}", name_or_path)


def make_environment(name_or_path: str | Path, seed: Optional[int] = None) -> ToyEnvironment:
    """Build an environment; a seed picks a suite member, None the defaults."""
    spec = load_environment_spec(name_or_path)
    env_class = ENVIRONMENT_CLASSES[spec.kind]
    env = env_class(spec) if seed is None else env_class.for_seed(spec, seed)
    logger.debug(f"Environment {env.describe()}")
    return env
