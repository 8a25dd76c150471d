import numpy as np
import pytest

from s3ap.core import (
    MalformedTagError,
    SimulationStep,
    TagAtOriginError,
    Trajectory,
    UnknownAgentError,
    UnknownAgentIndexError,
    resolve_state,
    resolve_tags,
)
from s3ap.core.tag_grammar import contains_tag_fragment


def test_same_as_state_and_mental(two_step_trajectory):
    obs = resolve_tags(two_step_trajectory.steps[0], two_step_trajectory, "Alice")
    assert obs.external == "Alice and Bob are in the kitchen."
    assert obs.mental == "I want tea."
    assert obs.render() == "Alice and Bob are in the kitchen. (thinking: I want tea.)"


def test_indexed_last_action(two_step_trajectory):
    obs = resolve_tags(two_step_trajectory.steps[1], two_step_trajectory, "Bob")
    assert obs.external == "Alice: put the kettle on"
    assert obs.mental is None


def test_bare_last_action_joins_non_none_actions(two_step_trajectory):
    step = SimulationStep.build(
        state="<same_as_last_action />",
        observations={"Alice": "<same_as_state />", "Bob": "none"},
        actions={"Alice": "none", "Bob": "none"},
        ordinal=1,
    )
    traj = Trajectory((two_step_trajectory.steps[0], step), two_step_trajectory.agents)
    assert resolve_state(traj.steps[1], traj) == "Alice: put the kettle on"
    assert resolve_tags(traj.steps[1], traj, "Alice").external == "Alice: put the kettle on"
    assert resolve_tags(traj.steps[1], traj, "Bob").is_none


def test_last_action_at_origin_raises():
    step = SimulationStep.build(
        state="s", observations={"A": "<same_as_last_action_1 />"}, actions={"A": "none"}
    )
    traj = Trajectory((step,), ("A",))
    with pytest.raises(TagAtOriginError):
        resolve_tags(step, traj, "A")


def test_index_past_agent_list_raises(two_step_trajectory):
    step = SimulationStep.build(
        state="s",
        observations={"Alice": "<same_as_last_action_3 />", "Bob": "none"},
        actions={"Alice": "none", "Bob": "none"},
        ordinal=1,
    )
    traj = Trajectory((two_step_trajectory.steps[0], step), two_step_trajectory.agents)
    with pytest.raises(UnknownAgentIndexError):
        resolve_tags(traj.steps[1], traj, "Alice")


def test_mental_state_in_state_is_malformed():
    step = SimulationStep.build(
        state="<mental_state>hidden</mental_state>", observations={"A": "none"}, actions={"A": "none"}
    )
    with pytest.raises(MalformedTagError):
        resolve_state(step, Trajectory((step,), ("A",)))


def test_unknown_observer(two_step_trajectory):
    with pytest.raises(UnknownAgentError):
        resolve_tags(two_step_trajectory.steps[0], two_step_trajectory, "Carol")


OBSERVATION_PARTS = [
    "<same_as_state />",
    "<same_as_last_action />",
    "<same_as_last_action_1 />",
    "<same_as_last_action_2 />",
    "<same_as_last_action_3 />",
    "<mental_state>I wonder.</mental_state>",
    "The door creaks.",
]


def _random_trajectory(rng: np.random.Generator, length: int) -> Trajectory:
    agents = ("A", "B", "C")
    steps = []
    for t in range(length):
        observations = {}
        for agent in agents:
            if rng.random() < 0.2:
                observations[agent] = "none"
                continue
            parts = rng.choice(OBSERVATION_PARTS, size=int(rng.integers(1, 4)))
            if t == 0:
                parts = [p for p in parts if "last_action" not in p] or ["The door creaks."]
            observations[agent] = " ".join(parts)
        actions = {a: "none" if rng.random() < 0.4 else f"act {t}" for a in agents}
        steps.append(SimulationStep.build(f"state {t}", observations, actions, ordinal=t))
    return Trajectory(tuple(steps), agents)


def test_resolved_observations_are_tag_free(rng):
    for _ in range(1000):
        traj = _random_trajectory(rng, int(rng.integers(1, 6)))
        for step in traj.steps:
            for agent in traj.agents:
                obs = resolve_tags(step, traj, agent)
                assert not contains_tag_fragment(obs.external)
                if obs.mental is not None:
                    assert not contains_tag_fragment(obs.mental)


def test_indexed_tag_law(rng):
    for _ in range(1000):
        traj = _random_trajectory(rng, int(rng.integers(2, 6)))
        t = int(rng.integers(1, len(traj)))
        x = int(rng.integers(1, 4))
        step = SimulationStep.build(
            "s",
            {a: f"<same_as_last_action_{x} />" for a in traj.agents},
            {a: "none" for a in traj.agents},
            ordinal=t,
        )
        extended = Trajectory(traj.steps[:t] + (step,), traj.agents)
        actor = traj.agents[x - 1]
        expected = f"{actor}: {traj.steps[t - 1].actions[actor].raw}"
        assert resolve_tags(extended.steps[t], extended, "A").external == expected
