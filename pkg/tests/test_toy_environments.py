import json

import pytest

from s3ap.core import AgentAction, SimulationStep, Trajectory
from s3ap.core.toy_environments import (
    EnvironmentDefinitionError,
    EnvPolicy,
    EnvRuleError,
    MutualFriendsEnv,
    NegotiationEnv,
    available_environments,
    make_environment,
)


@pytest.fixture
def negotiation() -> NegotiationEnv:
    return make_environment("negotiation")


@pytest.fixture
def mutual_friends() -> MutualFriendsEnv:
    return make_environment("mutual_friends")


def _act(env, world, **actions):
    return env.transition(world, {agent: AgentAction(text) for agent, text in actions.items()})


def test_packaged_environments():
    assert available_environments() == ("mutual_friends", "negotiation")
    with pytest.raises(EnvironmentDefinitionError):
        make_environment("chess")


def test_environment_from_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"kind": "negotiation", "name": "x"}), encoding="utf-8")
    with pytest.raises(EnvironmentDefinitionError):
        make_environment(path)
    with pytest.raises(EnvironmentDefinitionError):
        make_environment(tmp_path / "missing.json")


def test_low_offer_is_countered(negotiation):
    world = _act(negotiation, negotiation.reset(), Buyer="offer 70", Seller="ask 65")
    assert world.deal is None
    assert world.ask == 65
    assert world.last_counter == 65
    assert negotiation.state_text(world) == "The seller asks 65 for the lamp."
    assert "I am willing to settle near 65." in negotiation.observation(world, "Seller")


def test_offer_at_the_ask_closes_at_the_sellers_price(negotiation):
    world = _act(negotiation, negotiation.reset(), Buyer="offer 80", Seller="ask 65")
    assert world.deal == 75
    assert negotiation.state_text(world) == "The lamp was sold for 75."
    assert negotiation.scores(world)["Buyer"].value == pytest.approx(6.25)
    assert negotiation.scores(world)["Seller"].value == pytest.approx(3.75)
    assert "I would have settled for 65." in negotiation.observation(world, "Seller")


def test_negotiation_rejection_moves_the_ask(negotiation):
    world = _act(negotiation, negotiation.reset(), Buyer="offer 50", Seller="ask 65")
    assert world.deal is None
    assert world.ask == 65
    assert world.rejections == 1
    assert negotiation.state_text(world) == "The seller asks 65 for the lamp."


def test_accept_beats_walking_away(negotiation):
    world = _act(negotiation, negotiation.reset(), Buyer="accept", Seller="walk away")
    assert world.deal == 75
    walked = _act(negotiation, negotiation.reset(), Buyer="offer 50", Seller="walk away")
    assert walked.walked_away
    assert negotiation.scores(walked)["Buyer"].value == 0.0
    assert negotiation.is_terminal(walked)


def test_scripted_seller(negotiation):
    world = negotiation.reset()
    assert negotiation.scripted_action(world, "Seller").raw == "ask 65"
    assert negotiation.scripted_action(world, "Buyer").raw == "accept"
    tired = world.__class__(turn=1, ask=60, rejections=3)
    assert negotiation.scripted_action(tired, "Seller").raw == "walk away"


def test_negotiation_optimum(negotiation):
    assert negotiation.optimal_score().value == pytest.approx(10.0)


def test_seller_reveals_its_floor_after_a_deal(negotiation):
    world = _act(negotiation, negotiation.reset(), Buyer="accept", Seller="ask 65")
    assert "I would have settled for 65." in negotiation.observation(world, "Seller")


def test_seeded_suite_members_differ():
    spec_envs = [make_environment("negotiation", seed) for seed in range(6)]
    assert len({json.dumps(env.describe(), sort_keys=True) for env in spec_envs}) > 1
    assert make_environment("negotiation", 3).describe() == make_environment("negotiation", 3).describe()
    assert spec_envs[0].terms.concession > 0
    assert spec_envs[1].terms.concession == 0


def test_initial_trajectory_and_replay(negotiation):
    traj = negotiation.initial_trajectory()
    assert len(traj) == 1
    assert traj.metadata == {"env": "negotiation", "seed": None}
    assert negotiation.replay(traj) == negotiation.reset()

    first = traj.steps[0].with_actions({"Buyer": AgentAction("offer 50"), "Seller": AgentAction("ask 65")})
    world = _act(negotiation, negotiation.reset(), Buyer="offer 50", Seller="ask 65")
    longer = Trajectory((first, negotiation.step_for(world)), traj.agents)
    assert negotiation.replay(longer) == world

    wrong = Trajectory((first, traj.steps[0]), traj.agents)
    with pytest.raises(EnvRuleError):
        negotiation.replay(wrong)


def test_check_legal(negotiation):
    negotiation.check_legal("Buyer", AgentAction("offer 55"))
    negotiation.check_legal("Buyer", AgentAction.none())
    with pytest.raises(EnvRuleError):
        negotiation.check_legal("Buyer", AgentAction("offer 57"))


def test_env_policy_plays_the_script(negotiation):
    policy = EnvPolicy(negotiation, "Seller")
    state = negotiation.initial_trajectory()
    action = policy.sample(negotiation.action_space("Seller"), state, negotiation.goal("Seller"))
    assert action.raw == "ask 65"
    assert "never for less than 60" in negotiation.goal("Seller").description


def test_mutual_friends_found_when_both_mention(mutual_friends):
    world = _act(mutual_friends, mutual_friends.reset(), Alex="mention David", Blair="mention Tom")
    assert mutual_friends.found(world) == []
    world = _act(mutual_friends, world, Alex="mention Kate", Blair="mention David")
    assert mutual_friends.found(world) == ["David"]
    assert mutual_friends.state_text(world) == (
        "Alex has mentioned: David, Kate. Blair has mentioned: Tom, David. Mutual friends found: David."
    )
    assert mutual_friends.scores(world)["Alex"].value == pytest.approx(10 / 3)


def test_mutual_friends_ignore_unknown_names(mutual_friends):
    world = _act(mutual_friends, mutual_friends.reset(), Alex="mention Tom", Blair="mention Tom")
    assert world.mentions == ((), ("Tom",))


def test_mutual_friends_optimum(mutual_friends):
    assert mutual_friends.optimal_score().value == pytest.approx(20 / 3)


def test_mutual_friends_suite_members_share_friends():
    for seed in range(10):
        env = make_environment("mutual_friends", seed)
        assert len(env.mutual) == 3
        assert all(len(friends) == 6 for friends in env.friends.values())


def test_mutual_friends_partner_reads_in_order(mutual_friends):
    world = mutual_friends.reset()
    assert mutual_friends.scripted_action(world, "Blair").raw == "mention Tom"
    world = _act(mutual_friends, world, Alex="mention Kate", Blair="mention Tom")
    assert mutual_friends.scripted_action(world, "Blair").raw == "mention David"


def test_step_for_resolves_observations(mutual_friends):
    step = mutual_friends.step_for(mutual_friends.reset())
    assert isinstance(step, SimulationStep)
    assert step.timestep.raw == "turn 1"
    assert "My friends are Kate, David" in step.observations["Alex"].raw
