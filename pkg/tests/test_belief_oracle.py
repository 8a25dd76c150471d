import itertools
import json

import numpy as np
import pytest

from s3ap.core import InvalidValueError
from s3ap.core.belief_oracle import (
    UNKNOWN,
    Event,
    EventKind,
    InfeasibleParamsError,
    InvalidEventError,
    OracleScenario,
    ScenarioParams,
    UnknownEntityError,
    dump_scenario,
    generate_questions,
    generate_scenario,
    ground_truth_trajectory,
    has_false_belief,
    load_scenario,
    parse_question,
    query_belief,
    question_text,
    scenario_from_trajectory,
    simulate,
)
from s3ap.core.file_handling import FileHandlerError


def test_sally_anne_beliefs(sally_anne):
    snapshots = simulate(sally_anne)
    final = len(snapshots) - 1
    assert query_belief(snapshots, (), "marble", final) == "box"
    assert query_belief(snapshots, ("Sally",), "marble", final) == "basket"
    assert query_belief(snapshots, ("Anne",), "marble", final) == "box"
    assert query_belief(snapshots, ("Anne", "Sally"), "marble", final) == "basket"
    assert query_belief(snapshots, ("Sally", "Anne"), "marble", final) == "basket"
    assert has_false_belief(sally_anne)


def test_snapshots_cover_every_event(sally_anne):
    snapshots = simulate(sally_anne)
    assert [s.time for s in snapshots] == [0, 1, 2]
    assert snapshots[1].agent_locations["Sally"] is None
    assert snapshots[2].witnesses == frozenset({"Anne"})


def test_reentering_agent_sees_the_move(sally_anne):
    scenario = sally_anne.with_events(
        sally_anne.events + (Event(EventKind.ENTER, "Sally", location="room"),)
    )
    snapshots = simulate(scenario)
    assert query_belief(snapshots, ("Sally",), "marble", 3) == "box"
    assert not has_false_belief(scenario)


def test_claims_set_second_order_beliefs_only(sally_anne):
    scenario = sally_anne.with_events(
        sally_anne.events
        + (Event(EventKind.PRIVATE_TELL, "Anne", object="marble", container="box", recipient="Sally"),)
    )
    snapshots = simulate(scenario)
    assert query_belief(snapshots, ("Sally", "Anne"), "marble", 3) == "box"
    assert query_belief(snapshots, ("Anne",), "marble", 3) == "box"
    assert query_belief(snapshots, ("Sally",), "marble", 3) == "basket"


def test_unknown_belief_for_unseen_object():
    scenario = OracleScenario(
        locations=("kitchen", "garden"),
        containers={"jar": "kitchen", "bag": "garden"},
        objects={"coin": "jar"},
        agents={"Mia": "garden", "Leo": None},
    )
    snapshots = simulate(scenario)
    assert query_belief(snapshots, ("Mia",), "coin", 0) == UNKNOWN
    assert query_belief(snapshots, ("Leo",), "coin", 0) == UNKNOWN


def test_impossible_events_raise(sally_anne):
    bad = sally_anne.with_events((Event(EventKind.ENTER, "Sally", location="room"),))
    with pytest.raises(InvalidEventError):
        simulate(bad)
    away = sally_anne.with_events(
        (
            Event(EventKind.EXIT, "Anne", location="room"),
            Event(EventKind.MOVE_OBJECT, "Anne", object="marble", container="box"),
        )
    )
    with pytest.raises(InvalidEventError):
        simulate(away)


def test_scenario_name_checks():
    with pytest.raises(InvalidValueError):
        OracleScenario(("room",), {"room": "room"}, {}, {"Sally": "room"})
    with pytest.raises(InvalidEventError):
        OracleScenario(("room",), {"box": "room"}, {}, {"Sally": "room"}, (Event(EventKind.EXIT, "Bob", location="room"),))


def test_query_belief_argument_checks(sally_anne):
    snapshots = simulate(sally_anne)
    with pytest.raises(ValueError):
        query_belief(snapshots, ("Sally", "Sally"), "marble", 0)
    with pytest.raises(ValueError):
        query_belief(snapshots, (), "marble", 3)
    with pytest.raises(UnknownEntityError):
        query_belief(snapshots, ("Carol",), "marble", 0)
    with pytest.raises(ValueError):
        simulate(sally_anne, max_order=5)


def _naive_first_order(scenario):
    """Replays the story from the rules alone: who was present when the object last moved."""
    where = dict(scenario.agents)
    placement = dict(scenario.objects)
    belief = {}

    def look(agent):
        loc = where[agent]
        for obj, container in placement.items():
            if loc is not None and scenario.containers[container] == loc:
                belief[(agent, obj)] = container

    for agent in scenario.agents:
        look(agent)
    for event in scenario.events:
        if event.kind is EventKind.ENTER:
            where[event.actor] = event.location
            present = [a for a in where if where[a] == event.location]
        elif event.kind is EventKind.EXIT:
            present = [a for a in where if where[a] == event.location]
            for agent in present:
                look(agent)
            where[event.actor] = None
            continue
        elif event.kind is EventKind.MOVE_OBJECT:
            placement[event.object] = event.container
            present = [a for a in where if where[a] == scenario.containers[event.container]]
        else:
            continue
        for agent in present:
            look(agent)
    return {key: belief.get(key, UNKNOWN) for key in ((a, o) for a in scenario.agents for o in scenario.objects)}


def test_first_order_beliefs_match_naive_replay():
    params = ScenarioParams(n_agents=3, n_locations=2, n_containers=3, n_objects=2, n_events=6)
    for seed in range(60):
        scenario = generate_scenario(seed, params)
        final = simulate(scenario)[-1]
        for (agent, obj), expected in _naive_first_order(scenario).items():
            assert final.belief((agent,), obj) == expected, (seed, agent, obj)



def _small_world_events(agents):
    events = []
    for agent in agents:
        events += [
            Event(EventKind.ENTER, agent, location="room"),
            Event(EventKind.EXIT, agent, location="room"),
            Event(EventKind.MOVE_OBJECT, agent, object="marble", container="basket"),
            Event(EventKind.MOVE_OBJECT, agent, object="marble", container="box"),
        ]
    events.append(Event(EventKind.PUBLIC_CLAIM, agents[0], object="marble", container="box"))
    return events


def test_first_order_beliefs_match_naive_replay_exhaustively():
    checked = 0
    for cast in (("Sally",), ("Sally", "Anne"), ("Sally", "Anne", "Omar")):
        alphabet = _small_world_events(cast)
        starts = dict(zip(cast, ("room", "room", None)))
        for length in range(1, 5):
            for events in itertools.product(alphabet, repeat=length):
                scenario = OracleScenario(
                    locations=("room",),
                    containers={"basket": "room", "box": "room"},
                    objects={"marble": "basket"},
                    agents=starts,
                    events=events,
                )
                try:
                    final = simulate(scenario)[-1]
                except InvalidEventError:
                    continue
                checked += 1
                for (agent, obj), expected in _naive_first_order(scenario).items():
                    assert final.belief((agent,), obj) == expected, events
    assert checked > 500

def test_generation_is_deterministic():
    params = ScenarioParams(n_agents=3, n_events=5)
    assert generate_scenario(11, params) == generate_scenario(11, params)
    assert len(generate_scenario(11, params).events) == 5


def test_forced_false_belief():
    params = ScenarioParams(force_false_belief=True)
    for seed in range(20):
        assert has_false_belief(generate_scenario(seed, params))


@pytest.mark.parametrize(
    "params",
    [
        ScenarioParams(n_agents=0),
        ScenarioParams(n_events=-1),
        ScenarioParams(n_agents=1, force_false_belief=True),
    ],
)
def test_infeasible_params(params):
    with pytest.raises(InfeasibleParamsError):
        generate_scenario(0, params)


def test_question_text_round_trip():
    assert question_text((), "marble") == "Where is the marble really?"
    text = question_text(("Anne", "Sally"), "marble")
    assert text == "Where does Anne think Sally thinks the marble is?"
    assert parse_question(text) == (("Anne", "Sally"), "marble")
    assert parse_question("Who left first?") is None


def test_generated_questions_are_answered_by_the_oracle(sally_anne, rng):
    questions = generate_questions(sally_anne, rng, per_scenario=10, max_order=2)
    assert len(questions) == 5
    snapshots = simulate(sally_anne)
    for question in questions:
        assert question.options == ("basket", "box", UNKNOWN)
        assert question.options[question.gold_index] == query_belief(snapshots, question.chain, question.object, 2)
        assert question.order <= 2


def test_ground_truth_trajectory_inverts(sally_anne):
    traj = ground_truth_trajectory(sally_anne)
    assert len(traj) == 3
    assert traj.metadata["source"] == "oracle"
    assert traj.steps[0].actions["Sally"].raw == "exited the room"
    assert traj.steps[1].observations["Sally"].is_none
    assert scenario_from_trajectory(traj) == sally_anne


def test_generated_scenarios_invert_from_trajectories():
    params = ScenarioParams(n_agents=3, n_locations=2, n_containers=3, n_events=5)
    for seed in range(30):
        scenario = generate_scenario(seed, params)
        rebuilt = scenario_from_trajectory(ground_truth_trajectory(scenario))
        assert dict(simulate(rebuilt)[-1].beliefs) == dict(simulate(scenario)[-1].beliefs)


def test_scenario_files(tmp_path, sally_anne):
    path = tmp_path / "scenario.json"
    dump_scenario(sally_anne, path)
    assert load_scenario(path) == sally_anne
    assert list(json.loads(path.read_text(encoding="utf-8"))["agents"]) == ["Sally", "Anne"]

    path.write_text(json.dumps({"locations": [], "containers": {}, "objects": {}, "agents": {}}), encoding="utf-8")
    with pytest.raises(InvalidValueError):
        load_scenario(path)
    with pytest.raises(FileHandlerError):
        load_scenario(tmp_path / "missing.json")


def test_rng_fixture_is_numpy(rng):
    assert isinstance(rng, np.random.Generator)
