from .parse import init_parse_command
from .validate import init_validate_command
from .simulate import init_simulate_command
from .rollout import init_rollout_command
from .foresee import init_foresee_command
from .episode import init_episode_command
from .gen import init_gen_command
from .bench import init_bench_command
