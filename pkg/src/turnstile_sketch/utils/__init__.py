"""Utility functions for turnstile sketching."""

from .norms import dual_exponent, lp_norm, lp_pow, lq_norm, tail_mass

__all__ = [
    'lp_pow',
    'lp_norm',
    'lq_norm',
    'dual_exponent',
    'tail_mass',
]
