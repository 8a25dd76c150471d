# narrative_templates.py
"""
Rendering of oracle scenarios as English narratives, and the exact inverse.

Every sentence kind has a bank of templates. The first template of each bank is
the canonical form; a seeded paraphrase mode picks any template of the bank.
Each template is also compiled into a regular expression, so any narrative
built from the banks can be parsed back into its scenario.
"""

import logging
import re
import string
from functools import lru_cache
from typing import Optional

import numpy as np

from s3ap.core import InvalidValueError
from s3ap.core.belief_oracle import (
    Event,
    EventKind,
    InvalidEventError,
    OracleScenario,
    TemplateMismatchError,
)

logger = logging.getLogger(__name__)

SENTENCE_BANKS: dict[str, tuple[str, ...]] = {
    "location": (
        "There is a {location}.",
        "One of the places is the {location}.",
        "The story involves the {location}.",
    ),
    "container": (
        "The {container} is in the {location}.",
        "In the {location} there is a {container}.",
        "A {container} stands in the {location}.",
    ),
    "object": (
        "The {object} is in the {container}.",
        "The {object} lies inside the {container}.",
        "Inside the {container} is the {object}.",
    ),
    "agent_in": (
        "{agent} is in the {location}.",
        "{agent} is inside the {location}.",
        "{agent} is currently in the {location}.",
    ),
    "agent_out": (
        "{agent} is outside.",
        "{agent} is not in any room.",
        "{agent} waits outside.",
    ),
    EventKind.ENTER.value: (
        "{actor} entered the {location}.",
        "{actor} walked into the {location}.",
        "{actor} came into the {location}.",
    ),
    EventKind.EXIT.value: (
        "{actor} exited the {location}.",
        "{actor} left the {location}.",
        "{actor} walked out of the {location}.",
    ),
    EventKind.MOVE_OBJECT.value: (
        "{actor} moved the {object} to the {container}.",
        "{actor} put the {object} into the {container}.",
        "{actor} transferred the {object} to the {container}.",
    ),
    EventKind.PUBLIC_CLAIM.value: (
        "{actor} said publicly that the {object} is in the {container}.",
        "{actor} announced to everyone that the {object} is in the {container}.",
    ),
    EventKind.PRIVATE_TELL.value: (
        "{actor} privately told {recipient} that the {object} is in the {container}.",
        "{actor} whispered to {recipient} that the {object} is in the {container}.",
    ),
}

# Order in which sentence kinds are tried when parsing.
PARSE_ORDER = (
    "location",
    "container",
    "object",
    "agent_out",
    "agent_in",
    *(kind.value for kind in EventKind),
)


def _template_regex(template: str) -> re.Pattern:
    pattern = ""
    for literal, field, _, _ in string.Formatter().parse(template):
        pattern += re.escape(literal)
        if field:
            pattern += rf"(?P<{field}>\S+)"
    return re.compile(f"^{pattern}$")


@lru_cache(maxsize=1)
def _compiled() -> dict[str, tuple[re.Pattern, ...]]:
    return {kind: tuple(_template_regex(t) for t in bank) for kind, bank in SENTENCE_BANKS.items()}


class _Chooser:
    def __init__(self, paraphrase_seed: Optional[int]):
        self.rng = None if paraphrase_seed is None else np.random.default_rng(paraphrase_seed)

    def __call__(self, kind: str, **values: str) -> str:
        bank = SENTENCE_BANKS[kind]
        index = 0 if self.rng is None else int(self.rng.integers(len(bank)))
        return bank[index].format(**values)


def render_narrative(scenario: OracleScenario, paraphrase_seed: Optional[int] = None) -> str:
    """
    Narrative of the scenario: a placement paragraph, then one sentence per event.

    Args:
        scenario: The scenario to render.
        paraphrase_seed: None for the canonical wording, else the seed that picks
            alternative wordings from the template banks.
    """
    say = _Chooser(paraphrase_seed)
    placement = [say("location", location=location) for location in scenario.locations]
    placement += [
        say("container", container=container, location=location)
        for container, location in scenario.containers.items()
    ]
    placement += [
        say("object", object=obj, container=container) for obj, container in scenario.objects.items()
    ]
    for agent, location in scenario.agents.items():
        if location is None:
            placement.append(say("agent_out", agent=agent))
        else:
            placement.append(say("agent_in", agent=agent, location=location))

    story = [
        say(event.kind.value, **{k: v for k, v in event.to_dict().items() if k != "kind"})
        for event in scenario.events
    ]
    text = " ".join(placement)
    if story:
        text += "\n\n" + " ".join(story)
    return text


def _split_sentences(text: str) -> list[str]:
    return [s for s in re.split(r"(?<=\.)\s+", text.strip()) if s]


def parse_narrative_text(narrative: str) -> OracleScenario:
    """
    Parse a rendered narrative back into its scenario.

    Raises:
        TemplateMismatchError: when a sentence matches no template, or the
            sentences do not describe a valid scenario.
    """
    locations: list[str] = []
    containers: dict[str, str] = {}
    objects: dict[str, str] = {}
    agents: dict[str, Optional[str]] = {}
    events: list[Event] = []
    compiled = _compiled()

    for sentence in _split_sentences(narrative):
        for kind in PARSE_ORDER:
            match = next((m for p in compiled[kind] if (m := p.match(sentence))), None)
            if match is None:
                continue
            values = match.groupdict()
            if kind == "location":
                locations.append(values["location"])
            elif kind == "container":
                if values["location"] not in locations:
                    continue
                containers[values["container"]] = values["location"]
            elif kind == "object":
                if values["container"] not in containers:
                    continue
                objects[values["object"]] = values["container"]
            elif kind == "agent_out":
                agents[values["agent"]] = None
            elif kind == "agent_in":
                agents[values["agent"]] = values["location"]
            else:
                events.append(Event(EventKind(kind), **values))
            break
        else:
            raise TemplateMismatchError("Sentence matches no narrative template", sentence)

    try:
        scenario = OracleScenario(tuple(locations), containers, objects, agents, tuple(events))
    except (InvalidValueError, InvalidEventError) as e:
        raise TemplateMismatchError(f"Narrative does not describe a valid scenario: {e}")
    logger.debug(f"Parsed narrative: {len(agents)} agents, {len(events)} events")
    return scenario
