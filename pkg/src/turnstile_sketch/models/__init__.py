"""Models package for turnstile sketching."""

from .sample import SamplerConfig, SamplerMode, WeightedSample
from .sketch import MAX_EPS, HeavyList, SketchConfig
from .stream import STREAM_FORMAT_VERSION, StreamHeader, TurnstileUpdate

__all__ = [
    # Stream models
    'StreamHeader',
    'TurnstileUpdate',
    'STREAM_FORMAT_VERSION',

    # Sketch models
    'SketchConfig',
    'HeavyList',
    'MAX_EPS',

    # Sampling models
    'SamplerMode',
    'SamplerConfig',
    'WeightedSample',
]
