"""
commands/simulate.py
Replay a scenario file with the belief oracle.
"""

import argparse
import logging

from s3ap.config import Settings
from s3ap.core.belief_oracle import DEFAULT_MAX_ORDER, WorldSnapshot, ground_truth_trajectory, load_scenario, simulate
from s3ap.core.step_schema import write_trajectory
from s3ap.project import EXIT_OK, UsageError, print_json, register_command, require_file

logger = logging.getLogger(__name__)


def snapshot_to_dict(snapshot: WorldSnapshot) -> dict:
    return {
        "time": snapshot.time,
        "agent_locations": dict(snapshot.agent_locations),
        "placements": dict(snapshot.placements),
        "beliefs": {f"{' > '.join(chain)}: {obj}": where for (chain, obj), where in snapshot.beliefs.items()},
        "witnesses": sorted(snapshot.witnesses),
    }


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    if not 1 <= args.max_order <= DEFAULT_MAX_ORDER:
        raise UsageError(f"--max-order must be within 1..{DEFAULT_MAX_ORDER}")
    scenario = load_scenario(require_file(args.input, "Scenario file"))
    snapshots = simulate(scenario, args.max_order)
    if args.out:
        write_trajectory(ground_truth_trajectory(scenario, args.max_order), args.out)
    print_json([snapshot_to_dict(s) for s in snapshots])
    return EXIT_OK


def init_simulate_command(subparsers) -> None:
    parser = register_command(
        subparsers, "simulate", cmd_simulate, "Replay a scenario and print the world and beliefs after every event."
    )
    parser.add_argument("--input", required=True, help="Scenario JSON file.")
    parser.add_argument("--max-order", type=int, default=DEFAULT_MAX_ORDER, help="Deepest belief chain tracked.")
    parser.add_argument("--out", help="Also write the ground-truth trajectory here.")
