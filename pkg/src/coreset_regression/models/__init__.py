"""Models package for coreset regression."""

from .results import (
    WEIGHT_SLACK,
    Coreset,
    CoresetConfig,
    ExperimentConfig,
    LossKind,
    LossName,
    Method,
    MuComplexity,
    SolveResult,
    SolverOptions,
)

__all__ = [
    # Loss models
    'LossName',
    'LossKind',
    'MuComplexity',

    # Coreset models
    'Coreset',
    'CoresetConfig',
    'WEIGHT_SLACK',

    # Solver models
    'SolverOptions',
    'SolveResult',

    # Experiment models
    'Method',
    'ExperimentConfig',
]
