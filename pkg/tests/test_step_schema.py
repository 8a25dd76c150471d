import hashlib
import json

import pytest

from s3ap.core import SimulationStep
from s3ap.core.file_handling import FileHandlerError
from s3ap.core.step_schema import (
    EMBEDDED_SCHEMA_SHA256,
    IssueCode,
    SchemaValidationError,
    WireForm,
    decode_step,
    decode_trajectory,
    embedded_schema,
    encode_step,
    encode_trajectory,
    issues_to_feedback,
    model_schema,
    read_trajectory,
    schema_digest,
    write_trajectory,
)

STRING_LIST_STEP = {
    "timestep": "1",
    "state": "Sally puts the marble in the basket.",
    "observations": ["Sally: <same_as_state />", "Anne: none"],
    "actions": ["Sally: leave the room", "Anne: none"],
}


def test_embedded_schema_is_verbatim(fixtures_dir):
    golden = (fixtures_dir / "socialized_structure.schema.json").read_bytes()
    assert hashlib.sha256(golden).hexdigest() == EMBEDDED_SCHEMA_SHA256
    assert schema_digest() == EMBEDDED_SCHEMA_SHA256
    assert embedded_schema().encode("utf-8") == golden


def test_model_schema_forms():
    assert "definitions" not in model_schema(WireForm.OBJECT_MAP)
    assert model_schema(WireForm.STRING_LIST)["properties"]["observations"]["type"] == "array"


def test_decode_string_list_step():
    step, issues = decode_step(json.dumps(STRING_LIST_STEP))
    assert issues == []
    assert step.agents == ("Sally", "Anne")
    assert step.actions["Sally"].raw == "leave the room"
    assert step.observations["Anne"].is_none


def test_both_forms_decode_to_same_step():
    object_map = dict(
        STRING_LIST_STEP,
        observations={"Sally": "<same_as_state />", "Anne": "none"},
        actions={"Sally": "leave the room", "Anne": "none"},
    )
    a, _ = decode_step(json.dumps(STRING_LIST_STEP))
    b, _ = decode_step(json.dumps(object_map))
    assert encode_step(a, WireForm.OBJECT_MAP) == encode_step(b, WireForm.OBJECT_MAP)
    assert json.loads(encode_step(b, WireForm.STRING_LIST)) == STRING_LIST_STEP



AGENT_POOL = ("Sally", "Anne", "Omar", "Kate")
STATE_POOL = ("Sally enters the kitchen.", "The marble is in the box.", "none", "Rain starts, and Anne waves.")


def _random_step(rng):
    agents = [AGENT_POOL[i] for i in rng.permutation(len(AGENT_POOL))[: int(rng.integers(1, 5))]]
    parts = ["<same_as_state />", "<mental_state>I wonder where it is.</mental_state>", "A bell rings."]
    parts += [f"<same_as_last_action_{i} />" for i in range(1, len(agents) + 1)] + ["<same_as_last_action />"]
    observations, actions = {}, {}
    for agent in agents:
        picked = rng.choice(parts, size=int(rng.integers(1, 4)))
        observations[agent] = "none" if rng.random() < 0.2 else " ".join(picked)
        actions[agent] = "none" if rng.random() < 0.4 else f"picks option {int(rng.integers(0, 100))}"
    ordinal = int(rng.integers(1, 50))
    timestep = f"day {ordinal}" if rng.random() < 0.5 else None
    return SimulationStep.build(str(rng.choice(STATE_POOL)), observations, actions, timestep, ordinal)


@pytest.mark.parametrize("form", list(WireForm))
def test_generated_steps_survive_the_wire(rng, form):
    for _ in range(1000):
        step = _random_step(rng)
        decoded, issues = decode_step(encode_step(step, form), form, step.ordinal)
        assert issues == []
        assert decoded == step
        assert decoded.agents == step.agents

def test_invalid_json_is_a_parse_error():
    step, issues = decode_step("{not json")
    assert step is None
    assert [i.code for i in issues] == [IssueCode.PARSE_ERROR]


def test_all_issues_are_reported_together():
    document = {
        "timestep": "1",
        "state": "",
        "observations": ["Sally <same_as_state />", "Anne: <same_as_last_action_0 />"],
        "actions": {"Sally": "leave"},
    }
    step, issues = decode_step(json.dumps(document))
    assert step is None
    codes = {i.code for i in issues}
    assert {IssueCode.EMPTY_VALUE, IssueCode.BAD_ENTRY_FORMAT, IssueCode.MALFORMED_TAG} <= codes
    paths = {i.path for i in issues}
    assert "steps[0].observations[0]" in paths
    assert "steps[0].state" in paths


def test_missing_fields_and_agent_mismatch():
    _, issues = decode_step(json.dumps({"state": "s", "observations": {"A": "none"}, "actions": {"B": "none"}}))
    codes = [i.code for i in issues]
    assert codes.count(IssueCode.MISSING_FIELD) == 1
    assert IssueCode.AGENT_SET_MISMATCH in codes


def test_expected_form_is_enforced():
    _, issues = decode_step(json.dumps(STRING_LIST_STEP), form=WireForm.OBJECT_MAP)
    assert {i.code for i in issues} == {IssueCode.BAD_ENTRY_FORMAT}


def test_trajectory_rejects_non_object_steps():
    traj, issues = decode_trajectory([STRING_LIST_STEP, "oops"])
    assert traj is None
    assert issues[0].code is IssueCode.NON_OBJECT_STEP
    assert issues[0].path == "steps[1]"


def test_tag_at_origin_is_reported():
    document = dict(STRING_LIST_STEP, observations=["Sally: <same_as_last_action_1 />", "Anne: none"])
    traj, issues = decode_trajectory([document])
    assert traj is None
    assert issues[0].code is IssueCode.MALFORMED_TAG
    assert issues[0].path == "steps[0].observations.Sally"


def test_extra_fields_are_kept_in_metadata():
    traj, issues = decode_trajectory({"steps": [dict(STRING_LIST_STEP, note="hi")], "source": "test"})
    assert issues == []
    assert traj.metadata["extra_fields"] == {"steps[0].note": "hi", "source": "test"}


def test_feedback_is_numbered_in_path_order():
    _, issues = decode_trajectory(
        [
            dict(STRING_LIST_STEP, state=""),
            dict(STRING_LIST_STEP, timestep=""),
        ]
        + [dict(STRING_LIST_STEP)] * 9
        + [dict(STRING_LIST_STEP, state="")]
    )
    lines = issues_to_feedback(issues).splitlines()
    assert lines[0].startswith("1. steps[0].state")
    assert lines[1].startswith("2. steps[1].timestep")
    assert lines[2].startswith("3. steps[11].state")
    with pytest.raises(ValueError):
        issues_to_feedback([])


def test_write_and_read_trajectory(tmp_path, two_step_trajectory):
    path = write_trajectory(two_step_trajectory.with_metadata(source="test"), tmp_path / "t.s3ap.json")
    loaded = read_trajectory(path)
    assert loaded.agents == two_step_trajectory.agents
    assert loaded.metadata["source"] == "test"
    assert encode_trajectory(loaded) == path.read_text(encoding="utf-8")


def test_read_trajectory_errors(tmp_path):
    with pytest.raises(FileHandlerError):
        read_trajectory(tmp_path / "missing.s3ap.json")
    bad = tmp_path / "bad.s3ap.json"
    bad.write_text("[]x", encoding="utf-8")
    with pytest.raises(SchemaValidationError) as info:
        read_trajectory(bad)
    assert info.value.issues[0].code is IssueCode.PARSE_ERROR
