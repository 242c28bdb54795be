"""Constrained efficient global optimization over mixed continuous/categorical spaces."""

from .benchmarks import (
    augmented_branin_problem,
    branin_problem,
    get_benchmark,
    goldstein_problem,
    oracle_optimum,
)
from .ego import CountingProblem, Problem, RunRecord, run_categorywise_ego, run_mixed_ego, run_penalized_ga
from .gp import NumericalError, TrainedGP
from .infill import GAConfig, expected_improvement, maximize_ic, probability_of_feasibility
from .kernels import KernelKind, KernelSpec, gram, hyperparameter_count
from .space import DomainError, MixedPoint, MixedSpace, lhs_initial_doe
from .training import TrainerConfig, train

__all__ = [
    "CountingProblem",
    "DomainError",
    "GAConfig",
    "KernelKind",
    "KernelSpec",
    "MixedPoint",
    "MixedSpace",
    "NumericalError",
    "Problem",
    "RunRecord",
    "TrainedGP",
    "TrainerConfig",
    "augmented_branin_problem",
    "branin_problem",
    "expected_improvement",
    "get_benchmark",
    "goldstein_problem",
    "gram",
    "hyperparameter_count",
    "lhs_initial_doe",
    "maximize_ic",
    "oracle_optimum",
    "probability_of_feasibility",
    "run_categorywise_ego",
    "run_mixed_ego",
    "run_penalized_ga",
    "train",
]
