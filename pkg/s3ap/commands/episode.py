"""
commands/episode.py
Play toy-environment episodes with a myopic or foresighted ego.
"""

import argparse
import logging
from pathlib import Path

import pandas as pd

from s3ap.config import Settings
from s3ap.core.file_handling import FileHandler
from s3ap.core.foresee_agent import AgentMode, build_agents, run_episode
from s3ap.core.step_schema import WireForm, trajectory_to_object
from s3ap.core.toy_environments import make_environment
from s3ap.project import EXIT_OK, UsageError, parse_seeds, register_command

logger = logging.getLogger(__name__)

EPISODES_FILE = "episodes.json"


def cmd_episode(args: argparse.Namespace, settings: Settings) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    mode = AgentMode(args.agents)
    rows, episodes = [], []
    for seed in parse_seeds(args.seeds):
        env = make_environment(args.env, seed)
        agents = build_agents(env, mode, args.n)
        result = run_episode(env, agents, args.max_turns)
        world_model = agents[env.ego].world_model
        if world_model is not None:
            logger.debug(f"Seed {seed}: world model calls {dict(world_model.calls)}")
        rows.append(
            {
                "seed": seed,
                **{agent: score.value for agent, score in result.scores.items()},
                "turns": len(result.trajectory.steps) - 1,
                "forfeits": len(result.forfeits),
            }
        )
        episodes.append(
            {
                "seed": seed,
                **result.to_dict(),
                "trajectory": trajectory_to_object(result.trajectory, WireForm.STRING_LIST),
            }
        )

    frame = pd.DataFrame(rows)
    print(frame.to_markdown(index=False, floatfmt=".3f"))
    if args.report:
        FileHandler.write_json(Path(args.report) / EPISODES_FILE, {"env": args.env, "mode": mode.value, "n": args.n, "episodes": episodes})
    return EXIT_OK


def init_episode_command(subparsers) -> None:
    parser = register_command(subparsers, "episode", cmd_episode, "Play episodes of a toy environment.")
    parser.add_argument("--env", required=True, help="Environment name or definition file.")
    parser.add_argument("--agents", choices=[m.value for m in AgentMode], default=AgentMode.MYOPIC.value, help="Ego mode.")
    parser.add_argument("--n", type=int, default=1, help="Foresight iterations of a foresee ego.")
    parser.add_argument("--seeds", default="0", help="Seeds, e.g. 7, 0-99 or 1,4,9.")
    parser.add_argument("--max-turns", type=int, default=None, help="Turn limit (default: the environment's).")
    parser.add_argument("--report", help="Directory for episodes.json.")
