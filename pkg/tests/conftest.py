import os
from pathlib import Path

import numpy as np
import pytest

from s3ap.config import ENV_LIVE
from s3ap.core import SimulationStep, Trajectory
from s3ap.core.belief_oracle import Event, EventKind, OracleScenario

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_collection_modifyitems(config, items):
    if os.getenv(ENV_LIVE) == "1":
        return
    skip_live = pytest.mark.skip(reason=f"set {ENV_LIVE}=1 to run live-model tests")
    for item in items:
        if "live" in item.keywords:
            item.add_marker(skip_live)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def sally_anne() -> OracleScenario:
    """Sally puts the marble in the basket and leaves; Anne moves it to the box."""
    return OracleScenario(
        locations=("room",),
        containers={"basket": "room", "box": "room"},
        objects={"marble": "basket"},
        agents={"Sally": "room", "Anne": "room"},
        events=(
            Event(EventKind.EXIT, "Sally", location="room"),
            Event(EventKind.MOVE_OBJECT, "Anne", object="marble", container="box"),
        ),
    )


@pytest.fixture
def two_step_trajectory() -> Trajectory:
    first = SimulationStep.build(
        state="Alice and Bob are in the kitchen.",
        observations={
            "Alice": "<same_as_state /> <mental_state>I want tea.</mental_state>",
            "Bob": "<same_as_state />",
        },
        actions={"Alice": "put the kettle on", "Bob": "none"},
        timestep="morning",
    )
    second = SimulationStep.build(
        state="The kettle is on.",
        observations={"Alice": "<same_as_state />", "Bob": "<same_as_last_action_1 />"},
        actions={"Alice": "none", "Bob": "say good morning"},
        timestep="morning, later",
        ordinal=1,
    )
    return Trajectory((first, second), ("Alice", "Bob"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
