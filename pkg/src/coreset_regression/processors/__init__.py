"""Processors package for coreset regression."""

from .baselines import leverage_distribution, oblivious_stub_coreset, offline_leverage_coreset
from .ingest import ingest_csv, read_labelled_csv
from .losses import (
    loss_grad,
    loss_value,
    objective,
    objective_grad,
    perturbation_sensitivity,
    phi_p_cdf,
)
from .sizing import sketch_sizes
from .solver import approximation_ratio, minimize_loss, solve_reduced

__all__ = [
    'phi_p_cdf',
    'loss_value',
    'loss_grad',
    'objective',
    'objective_grad',
    'perturbation_sensitivity',
    'minimize_loss',
    'solve_reduced',
    'approximation_ratio',
    'leverage_distribution',
    'offline_leverage_coreset',
    'oblivious_stub_coreset',
    'read_labelled_csv',
    'ingest_csv',
    'sketch_sizes',
]
