"""Evolutionary population training with a portfolio of multi-horizon TD3 learners.

A population of actor networks evolves against episode return while a
portfolio of TD3 learners with different discount rates trains off-policy
from a shared replay buffer.  A UCB resource manager splits the rollout
budget across learners each generation, and learner actors are periodically
copied back into the population.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config, save_config
from .envs import make_env
from .experiment import RunRecord, run_experiment
from .orchestrator import CerlState, run_generation

__all__ = [
    "CerlState",
    "RunConfig",
    "RunRecord",
    "load_config",
    "make_env",
    "run_experiment",
    "run_generation",
    "save_config",
    "__version__",
]
