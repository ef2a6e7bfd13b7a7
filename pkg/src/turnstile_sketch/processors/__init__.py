"""Processors package for turnstile sketching."""

from .conditioning import (
    Conditioner,
    EmbeddingSketch,
    finalize_conditioner,
    leverage_bounds,
    load_conditioner,
    measure_conditioning,
    save_conditioner,
)
from .count_sketch import SketchState, merge_snapshots, merge_states
from .lp_sampler import (
    LpSampler,
    UniformSampler,
    draw_sample,
    estimate_total_norm,
    mixture_pricer,
    scaled_update,
    select_alpha,
    uniform_sample,
    union_mixture,
)
from .parameters import ParameterMode, practical_config, sampler_config

__all__ = [
    'SketchState',
    'merge_states',
    'merge_snapshots',
    'LpSampler',
    'UniformSampler',
    'scaled_update',
    'select_alpha',
    'draw_sample',
    'estimate_total_norm',
    'union_mixture',
    'mixture_pricer',
    'uniform_sample',
    'EmbeddingSketch',
    'Conditioner',
    'finalize_conditioner',
    'leverage_bounds',
    'measure_conditioning',
    'save_conditioner',
    'load_conditioner',
    'ParameterMode',
    'practical_config',
    'sampler_config',
]
