"""Pareto set learning for expensive multi-objective optimization with
Stein variational hypernetworks."""

__version__ = "0.1.0"

from .gp import GaussianProcess, SurrogateBundle  # noqa: E402
from .model import ParetoSetModel  # noqa: E402
from .optimizer import SVHPSL, RunConfig, run  # noqa: E402
from .problems import Problem, get_problem, load_problem  # noqa: E402

__all__ = [
    "GaussianProcess",
    "ParetoSetModel",
    "Problem",
    "RunConfig",
    "SVHPSL",
    "SurrogateBundle",
    "get_problem",
    "load_problem",
    "run",
]
