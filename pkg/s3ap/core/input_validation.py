"""This module contains the Pydantic models for the toolkit's input files"""

import logging
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

logger = logging.getLogger("Input Validation")

__all__ = [
    "ValidationError",
    "EventInput",
    "ScenarioInput",
    "ScenarioParamsInput",
    "PriceGrid",
    "NegotiationTerms",
    "NegotiationInput",
    "MutualFriendsInput",
    "EnvironmentInput",
    "SyntheticLine",
    "GenericLine",
    "validate_environment",
]


class EventInput(BaseModel):
    kind: Literal["Enter", "Exit", "MoveObject", "PublicClaim", "PrivateTell"]
    actor: str
    location: Optional[str] = None
    object: Optional[str] = None
    container: Optional[str] = None
    recipient: Optional[str] = None


class ScenarioInput(BaseModel):
    """Pydantic model for an oracle scenario file."""

    locations: list[str]
    containers: dict[str, str]
    objects: dict[str, str]
    agents: dict[str, Optional[str]]
    events: list[EventInput] = Field(default_factory=list)

    @field_validator("locations")
    @classmethod
    def check_locations(cls, v):
        if not v:
            raise ValueError("A scenario needs at least one location")
        return v

    @field_validator("agents")
    @classmethod
    def check_agents(cls, v):
        if not v:
            raise ValueError("A scenario needs at least one agent")
        return v


class ScenarioParamsInput(BaseModel):
    """Pydantic model for the --params file of the generator."""

    n_agents: int = Field(2, ge=1)
    n_locations: int = Field(1, ge=1)
    n_containers: int = Field(2, ge=1)
    n_objects: int = Field(1, ge=1)
    n_events: int = Field(4, ge=0)
    force_false_belief: bool = False
    allow_claims: bool = True
    questions_per_scenario: int = Field(4, ge=1)
    max_question_order: int = Field(3, ge=0, le=4)
    paraphrase: bool = False


class PriceGrid(BaseModel):
    low: int
    high: int
    step: int = Field(gt=0)

    @model_validator(mode="after")
    def check_bounds(self):
        if self.low >= self.high:
            raise ValueError("Price grid needs low < high")
        if (self.high - self.low) % self.step:
            raise ValueError("Price grid bounds must be a whole number of steps apart")
        return self

    def prices(self) -> list[int]:
        return list(range(self.low, self.high + 1, self.step))


class NegotiationTerms(BaseModel):
    """Private terms of one negotiation: the buyer's value and the seller's script."""

    value: int
    reservation: int
    opening_ask: int
    concession: int = Field(ge=0)
    patience: int = Field(ge=0)

    @model_validator(mode="after")
    def check_terms(self):
        if self.reservation >= self.value:
            raise ValueError("Reservation price must be below the buyer's value")
        if self.opening_ask < self.reservation:
            raise ValueError("Opening ask must not be below the reservation price")
        return self


class NegotiationInput(BaseModel):
    """Pydantic model for a negotiation environment definition."""

    name: str
    kind: Literal["negotiation"]
    item: str
    buyer: str
    seller: str
    max_turns: int = Field(ge=0)
    price_grid: PriceGrid
    defaults: NegotiationTerms
    no_deal_score: float = Field(0.0, ge=0.0, le=10.0)
    conceder_every: int = Field(3, ge=1)
    goals: dict[str, str]

    @model_validator(mode="after")
    def check_roles(self):
        if self.buyer == self.seller:
            raise ValueError("Buyer and seller must be different agents")
        if set(self.goals) != {self.buyer, self.seller}:
            raise ValueError("Goals must be given for exactly the buyer and the seller")
        return self

    @model_validator(mode="after")
    def check_defaults_on_grid(self):
        prices = set(self.price_grid.prices())
        for name in ("value", "reservation", "opening_ask"):
            if getattr(self.defaults, name) not in prices:
                raise ValueError(f"Default {name} is not on the price grid")
        return self


class MutualFriendsInput(BaseModel):
    """Pydantic model for a mutual-friends environment definition."""

    name: str
    kind: Literal["mutual_friends"]
    seeker: str
    partner: str
    max_turns: int = Field(ge=0)
    list_size: int = Field(ge=1)
    mutual_size: int = Field(ge=1)
    name_pool: list[str]
    defaults: dict[str, list[str]]
    goals: dict[str, str]

    @model_validator(mode="after")
    def check_sizes(self):
        if self.mutual_size > self.list_size:
            raise ValueError("mutual_size cannot exceed list_size")
        if len(set(self.name_pool)) < 2 * self.list_size - self.mutual_size:
            raise ValueError("Name pool is too small for the list sizes")
        return self

    @model_validator(mode="after")
    def check_defaults(self):
        agents = {self.seeker, self.partner}
        if self.seeker == self.partner:
            raise ValueError("Seeker and partner must be different agents")
        if set(self.defaults) != agents or set(self.goals) != agents:
            raise ValueError("Defaults and goals must be given for exactly the two agents")
        for agent, friends in self.defaults.items():
            if len(set(friends)) != len(friends) or not friends:
                raise ValueError(f"Friend list of {agent} must be nonempty and distinct")
        if not set(self.defaults[self.seeker]) & set(self.defaults[self.partner]):
            raise ValueError("Default friend lists share no mutual friend")
        return self


EnvironmentInput = Union[NegotiationInput, MutualFriendsInput]


def validate_environment(data: dict) -> EnvironmentInput:
    """
    Validate an environment definition, dispatching on its "kind".

    Raises:
        ValueError: for an unknown kind.
        ValidationError: when the definition does not validate.
    """
    kind = data.get("kind") if isinstance(data, dict) else None
    if kind == "negotiation":
        return NegotiationInput.model_validate(data)
    if kind == "mutual_friends":
        return MutualFriendsInput.model_validate(data)
    raise ValueError(f"Unknown environment kind: {kind!r}")


class SyntheticLine(BaseModel):
    """One question of a generated corpus, with the scenario it was asked about."""

    context_id: str
    question_id: str
    context: str
    question: str
    options: list[str]
    gold_index: int = Field(ge=0)
    order: int = Field(ge=0)
    scenario: ScenarioInput

    @model_validator(mode="after")
    def check_gold(self):
        if self.gold_index >= len(self.options):
            raise ValueError("gold_index is past the option list")
        return self


class GenericLine(BaseModel):
    """
    One benchmark item in the generic JSONL format.

    Exactly one answer form is given: `options` + `gold_index` (multiple choice),
    `gold_list` (list answer) or `answer` (exact text).
    """

    context_id: str
    context: str
    question: str
    question_id: Optional[str] = None
    options: Optional[list[str]] = None
    gold_index: Optional[int] = Field(None, ge=0)
    gold_list: Optional[list[str]] = None
    answer: Optional[str] = None
    group_id: Optional[str] = None
    category: Optional[str] = None

    @model_validator(mode="after")
    def check_answer_form(self):
        forms = [
            self.options is not None or self.gold_index is not None,
            self.gold_list is not None,
            self.answer is not None,
        ]
        if sum(forms) != 1:
            raise ValueError("Give exactly one of options+gold_index, gold_list or answer")
        if forms[0]:
            if self.options is None or self.gold_index is None:
                raise ValueError("Multiple-choice items need both options and gold_index")
            if self.gold_index >= len(self.options):
                raise ValueError("gold_index is past the option list")
        return self
