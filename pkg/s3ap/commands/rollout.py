"""
commands/rollout.py
Predict the next steps of a trajectory with a social world model.
"""

import argparse
import logging

from s3ap.config import Settings
from s3ap.core.simulation_step import AgentAction, agent_id
from s3ap.core.social_world_model import LlmSocialWorldModel, OracleSocialWorldModel, rollout
from s3ap.core.step_schema import WireForm, encode_steps, read_trajectory
from s3ap.core.toy_environments import EnvPolicy, make_environment
from s3ap.project import EXIT_OK, ORACLE_BACKEND, UsageError, live_enabled, register_command, require_file, resolve_backend

logger = logging.getLogger(__name__)


def cmd_rollout(args: argparse.Namespace, settings: Settings) -> int:
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    traj = read_trajectory(require_file(args.input, "Trajectory file"))
    env = make_environment(args.env, args.seed)
    ego = agent_id(args.ego) if args.ego else env.ego
    if ego not in traj.agents:
        raise UsageError(f"Ego '{ego}' is not an agent of the trajectory")

    if args.backend == ORACLE_BACKEND:
        model = OracleSocialWorldModel(env)
    else:
        model = LlmSocialWorldModel(resolve_backend(args.backend, settings, live_enabled(args)))

    policy = EnvPolicy(env, ego)
    space, goal = env.action_space(ego), env.goal(ego)

    def choose(current):
        if args.ego_policy == "none":
            return AgentAction.none()
        return policy.sample(space, current, goal)

    steps = rollout(model, traj, ego, choose, args.n)
    logger.debug(f"World model calls: {dict(model.calls)}")
    print(encode_steps(steps, traj.agents, WireForm(args.form)))
    return EXIT_OK


def init_rollout_command(subparsers) -> None:
    parser = register_command(subparsers, "rollout", cmd_rollout, "Predict n steps ahead of a trajectory.")
    parser.add_argument("--input", required=True, help="Trajectory file whose last step is the current one.")
    parser.add_argument("--env", required=True, help="Environment name or definition file.")
    parser.add_argument("--seed", type=int, default=None, help="Suite seed of the environment.")
    parser.add_argument("--ego", help="Acting agent (default: the environment's ego).")
    parser.add_argument("--n", type=int, default=1, help="Number of steps to predict.")
    parser.add_argument("--backend", default=ORACLE_BACKEND, help="'oracle', mock:<script.json> or a model profile.")
    parser.add_argument("--ego-policy", choices=["env", "none"], default="env", help="How the ego acts meanwhile.")
    parser.add_argument("--form", choices=[f.value for f in WireForm], default=WireForm.STRING_LIST.value)
