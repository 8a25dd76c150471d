# foresee_agent.py
"""
Agent policies, the Foresee-and-Act lookahead and episode runners.

Foresee-and-Act samples an action, lets a social world model play the world
forward `max_iterations` times (sampling a new action on each predicted state)
and hands the simulated steps to a refiner that decides the action taken in the
original state.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import pandas as pd

from s3ap.config import DEFAULT_PARALLELISM
from s3ap.core.action_space import (
    ActionDecodeError,
    ActionSpace,
    ActionSpaceKind,
    Goal,
    GoalScore,
    Policy,
    Refiner,
    action_object,
    decode_action,
)
from s3ap.core.agent_memory import agent_view, append_step
from s3ap.core.llm_backend import CompletionBackend, CompletionRequest
from s3ap.core.prompt_templates import DEFAULT_VERSION, get_prompt_template
from s3ap.core.simulation_step import AgentAction, AgentId, SimulationStep, Trajectory, agent_id
from s3ap.core.social_world_model import (
    OracleSocialWorldModel,
    SocialWorldModel,
    SwmQuery,
    advance,
    predict_next_step,
)
from s3ap.core.step_schema import WireForm, encode_steps
from s3ap.core.toy_environments import EnvPolicy, EnvRuleError, ToyEnvironment, make_environment

logger = logging.getLogger(__name__)

NONE = AgentAction.none()


@dataclass(frozen=True)
class ForeseeConfig:
    max_iterations: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True)
class ForeseeTrace:
    """What one Foresee-and-Act decision saw and chose."""

    initial_action: AgentAction
    intended_action: AgentAction
    action: AgentAction
    sim_states: tuple[SimulationStep, ...]

    def to_dict(self) -> dict:
        return {
            "initial_action": self.initial_action.raw,
            "intended_action": self.intended_action.raw,
            "action": self.action.raw,
            "simulated_states": [step.state for step in self.sim_states],
        }


# ---------------------------------------------------------------- policies


class ScriptedPolicy:
    """Plays a fixed list of actions in order, then repeats the last one."""

    def __init__(self, agent: str, actions: Sequence[str | AgentAction]):
        if not actions:
            raise ValueError("A scripted policy needs at least one action")
        self.agent = agent_id(agent)
        self.actions = [a if isinstance(a, AgentAction) else AgentAction(a) for a in actions]
        self.calls = 0

    def sample(self, space: ActionSpace, state: Trajectory, goal: Goal) -> AgentAction:
        action = self.actions[min(self.calls, len(self.actions) - 1)]
        self.calls += 1
        return action


class LlmPolicy:
    """Asks a completion backend for the next action from the agent's own view."""

    def __init__(self, agent: str, backend: CompletionBackend, version: str = DEFAULT_VERSION):
        self.agent = agent_id(agent)
        self.backend = backend
        self.version = version

    def build_prompt(self, space: ActionSpace, state: Trajectory, goal: Goal) -> str:
        memory, observation = agent_view(state, self.agent, len(state.steps) - 1)
        return get_prompt_template("sample_action", self.version).render(
            agent=self.agent,
            goal=goal.description,
            memory=memory.render(),
            observation=observation.render(),
            format_instructions=space.describe(),
        )

    def sample(self, space: ActionSpace, state: Trajectory, goal: Goal) -> AgentAction:
        prompt = self.build_prompt(space, state, goal)
        raw = self.backend.complete(CompletionRequest.from_prompt(self.backend.model_id, prompt))
        return decode_action(raw, space)


def sample_action(policy: Policy, space: ActionSpace, state: Trajectory, goal: Goal) -> AgentAction:
    """
    Draw one action from `policy`, enforcing membership in `space`.

    Raises:
        ActionDecodeError: when the policy's action is outside the space.
        ValueError: when the state has no step to act on.
    """
    if not state.steps:
        raise ValueError("Cannot sample an action for an empty trajectory")
    if space.kind is ActionSpaceKind.ENUMERATED and len(space.options) == 1:
        return space.options[0]
    action = policy.sample(space, state, goal)
    if not space.contains(action):
        raise ActionDecodeError(f"Policy of {policy.agent} chose '{action.raw}' outside the action space")
    return action


# ---------------------------------------------------------------- refinement


class PassThroughRefiner:
    def refine(self, space, sim_states, original_state, goal, intended) -> AgentAction:
        return intended


class ScriptedRefiner:
    """Returns a fixed action, or the intended one when none is set."""

    def __init__(self, action: Optional[str | AgentAction] = None):
        self.action = AgentAction(action) if isinstance(action, str) else action

    def refine(self, space, sim_states, original_state, goal, intended) -> AgentAction:
        return self.action or intended


def build_refine_prompt(
    agent: AgentId,
    space: ActionSpace,
    sim_states: Sequence[SimulationStep],
    original_state: Trajectory,
    intended: AgentAction,
    version: str = DEFAULT_VERSION,
) -> str:
    agents = original_state.agents
    return get_prompt_template("refine_action", version).render(
        agent=agent,
        history=encode_steps(original_state.steps, agents, WireForm.STRING_LIST),
        intended_action=json.dumps(action_object(intended)),
        socialized_context_info=encode_steps(sim_states, agents, WireForm.STRING_LIST),
        format_instructions=space.describe(),
    )


class LlmRefiner:
    """Refines the intended action with a completion backend."""

    def __init__(self, agent: str, backend: CompletionBackend, version: str = DEFAULT_VERSION):
        self.agent = agent_id(agent)
        self.backend = backend
        self.version = version

    def refine(self, space, sim_states, original_state, goal, intended) -> AgentAction:
        prompt = build_refine_prompt(self.agent, space, sim_states, original_state, intended, self.version)
        raw = self.backend.complete(CompletionRequest.from_prompt(self.backend.model_id, prompt))
        return decode_action(raw, space)


def act_from_sim(
    space: ActionSpace,
    sim_states: Sequence[SimulationStep],
    original_state: Trajectory,
    goal: Goal,
    intended: AgentAction,
    refiner: Refiner,
) -> AgentAction:
    """
    Decide the action for `original_state` from the simulated steps.

    Raises:
        ValueError: if no simulated step is given.
        ActionDecodeError: when the refined action is outside the space.
    """
    if not sim_states:
        raise ValueError("act_from_sim needs at least one simulated step")
    action = refiner.refine(space, sim_states, original_state, goal, intended)
    if not space.contains(action):
        raise ActionDecodeError(f"Refined action '{action.raw}' is outside the action space")
    return action


def foresee_and_act_traced(
    space: ActionSpace,
    goal: Goal,
    state: Trajectory,
    cfg: ForeseeConfig,
    world_model: SocialWorldModel,
    policy: Policy,
    refiner: Refiner,
) -> ForeseeTrace:
    """
    Foresee-and-Act with its intermediate results.

    The world model is called `cfg.max_iterations` times, the policy one time
    more, and the refiner once with the original state.
    """
    ego = policy.agent
    cur_state = state
    cur_action = sample_action(policy, space, cur_state, goal)
    initial = cur_action
    sim_states: list[SimulationStep] = []
    for _ in range(cfg.max_iterations):
        prediction = predict_next_step(world_model, SwmQuery(cur_state, ego, cur_action))
        next_state = advance(cur_state, prediction, ego, cur_action)
        cur_action = sample_action(policy, space, next_state, goal)
        cur_state = next_state
        sim_states.append(next_state.steps[-1])
    action = act_from_sim(space, sim_states, state, goal, cur_action, refiner)
    logger.debug(f"{ego}: initial '{initial.raw}', intended '{cur_action.raw}', chose '{action.raw}'")
    return ForeseeTrace(initial, cur_action, action, tuple(sim_states))


def foresee_and_act(
    space: ActionSpace,
    goal: Goal,
    state: Trajectory,
    cfg: ForeseeConfig,
    world_model: SocialWorldModel,
    policy: Policy,
    refiner: Refiner,
) -> AgentAction:
    return foresee_and_act_traced(space, goal, state, cfg, world_model, policy, refiner).action


# ---------------------------------------------------------------- episodes


class AgentMode(str, Enum):
    MYOPIC = "myopic"
    FORESEE = "foresee"


@dataclass
class AgentConfig:
    policy: Policy
    mode: AgentMode = AgentMode.MYOPIC
    world_model: Optional[SocialWorldModel] = None
    refiner: Optional[Refiner] = None
    foresee: ForeseeConfig = field(default_factory=ForeseeConfig)

    def __post_init__(self):
        self.mode = AgentMode(self.mode)
        if self.mode is AgentMode.FORESEE and (self.world_model is None or self.refiner is None):
            raise ValueError("A foresee agent needs a world model and a refiner")


@dataclass(frozen=True)
class Forfeit:
    turn: int
    agent: AgentId
    reason: str


@dataclass(frozen=True)
class EpisodeResult:
    scores: Mapping[AgentId, GoalScore]
    trajectory: Trajectory
    forfeits: tuple[Forfeit, ...] = ()
    traces: tuple[ForeseeTrace, ...] = ()

    def to_dict(self) -> dict:
        return {
            "scores": {agent: score.value for agent, score in self.scores.items()},
            "turns": len(self.trajectory.steps) - 1,
            "forfeits": [{"turn": f.turn, "agent": f.agent, "reason": f.reason} for f in self.forfeits],
            "traces": [trace.to_dict() for trace in self.traces],
        }


def _choose(config: AgentConfig, space: ActionSpace, goal: Goal, traj: Trajectory) -> tuple[AgentAction, Optional[ForeseeTrace]]:
    if config.mode is AgentMode.MYOPIC:
        return sample_action(config.policy, space, traj, goal), None
    trace = foresee_and_act_traced(
        space, goal, traj, config.foresee, config.world_model, config.policy, config.refiner
    )
    return trace.action, trace


def _with_pending(traj: Trajectory, actions: Mapping[AgentId, AgentAction]) -> Trajectory:
    current = traj.steps[-1].with_actions(actions)
    return Trajectory(traj.steps[:-1] + (current,), traj.agents, traj.metadata)


def run_episode(
    env: ToyEnvironment,
    agents: Mapping[AgentId, AgentConfig],
    max_turns: Optional[int] = None,
) -> EpisodeResult:
    """
    Play one episode of rounds until the world is terminal or `max_turns`
    (default: the environment's own limit) rounds have passed.

    Within a round the agents move in `env.agents` order, the ego first. Each
    agent sees the moves already made this round as the pending actions of the
    last trajectory step, so a reply can answer the move before it.

    Illegal or undecodable actions forfeit the agent's turn.

    Raises:
        ValueError: unless exactly the environment's agents are configured.
    """
    if set(agents) != set(env.agents):
        raise ValueError(f"Configure exactly the agents {list(env.agents)}, got {sorted(agents)}")
    turns = env.max_turns if max_turns is None else max_turns
    if turns < 0:
        raise ValueError("max_turns must be >= 0")

    world = env.reset()
    traj = env.initial_trajectory()
    forfeits: list[Forfeit] = []
    traces: list[ForeseeTrace] = []
    for turn in range(turns):
        if env.is_terminal(world):
            break
        actions: dict[AgentId, AgentAction] = {}
        for agent in env.agents:
            view = _with_pending(traj, actions) if actions else traj
            try:
                action, trace = _choose(agents[agent], env.action_space(agent), env.goal(agent), view)
                env.check_legal(agent, action)
            except (ActionDecodeError, EnvRuleError) as e:
                logger.warning(f"{agent} forfeits turn {turn}: {e}")
                forfeits.append(Forfeit(turn, agent, str(e)))
                action, trace = NONE, None
            if trace is not None:
                traces.append(trace)
            actions[agent] = action
        world = env.transition(world, actions)
        traj = append_step(_with_pending(traj, actions), env.step_for(world))

    scores = env.scores(world)
    logger.info(
        f"Episode {env.name} (seed {env.seed}) ended after {len(traj.steps) - 1} turn(s): "
        + ", ".join(f"{agent}={score.value:.2f}" for agent, score in scores.items())
    )
    return EpisodeResult(scores, traj, tuple(forfeits), tuple(traces))


def build_agents(
    env: ToyEnvironment,
    ego_mode: AgentMode,
    n: int = 1,
    world_model: Optional[SocialWorldModel] = None,
) -> dict[AgentId, AgentConfig]:
    """Scripted partners plus the ego, myopic or with foresight."""
    configs = {agent: AgentConfig(EnvPolicy(env, agent)) for agent in env.agents}
    if AgentMode(ego_mode) is AgentMode.FORESEE:
        configs[env.ego] = AgentConfig(
            EnvPolicy(env, env.ego),
            AgentMode.FORESEE,
            world_model or OracleSocialWorldModel(env),
            env.refiner(env.ego),
            ForeseeConfig(n),
        )
    return configs


def run_suite(
    env_name: str | Path,
    seeds: Iterable[int],
    ego_mode: AgentMode,
    n: int = 1,
    parallelism: int = DEFAULT_PARALLELISM,
) -> pd.DataFrame:
    """One row per seed: ego and partner scores and the best achievable ego score."""
    ego_mode = AgentMode(ego_mode)

    def play(seed: int) -> dict:
        env = make_environment(env_name, seed)
        result = run_episode(env, build_agents(env, ego_mode, n))
        partner = env.partners[0]
        return {
            "seed": seed,
            "mode": ego_mode.value,
            "ego_score": result.scores[env.ego].value,
            "partner_score": result.scores[partner].value,
            "optimum": env.optimal_score().value,
            "turns": len(result.trajectory.steps) - 1,
            "forfeits": len(result.forfeits),
        }

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        rows = list(pool.map(play, list(seeds)))
    return pd.DataFrame(rows, columns=["seed", "mode", "ego_score", "partner_score", "optimum", "turns", "forfeits"])


def compare_suite(env_name: str | Path, seeds: Iterable[int], n: int = 1, parallelism: int = DEFAULT_PARALLELISM) -> pd.DataFrame:
    """Myopic and foresee ego scores side by side, one row per seed."""
    seeds = list(seeds)
    myopic = run_suite(env_name, seeds, AgentMode.MYOPIC, n, parallelism)
    foresee = run_suite(env_name, seeds, AgentMode.FORESEE, n, parallelism)
    frame = pd.DataFrame(
        {
            "seed": myopic["seed"],
            "myopic": myopic["ego_score"],
            "foresee": foresee["ego_score"],
            "optimum": myopic["optimum"],
        }
    )
    frame["improved"] = frame["foresee"] > frame["myopic"]
    return frame


def summarize_comparison(frame: pd.DataFrame) -> dict:
    if frame.empty:
        return {"seeds": 0, "mean_myopic": 0.0, "mean_foresee": 0.0, "mean_optimum": 0.0, "improved_share": 0.0}
    return {
        "seeds": int(len(frame)),
        "mean_myopic": round(float(frame["myopic"].mean()), 4),
        "mean_foresee": round(float(frame["foresee"].mean()), 4),
        "mean_optimum": round(float(frame["optimum"].mean()), 4),
        "improved_share": round(float(frame["improved"].mean()), 4),
    }
