"""Sketch sizes of the samplers behind a coreset."""

import logging
from typing import Dict

from turnstile_sketch.models.sketch import SketchConfig
from turnstile_sketch.processors.parameters import coreset_config

from ..models.results import CoresetConfig

logger = logging.getLogger(__name__)


def sketch_sizes(config: CoresetConfig, n: int, d: int) -> Dict[float, SketchConfig]:
    """SketchConfig of every sampler exponent of a coreset construction.

    The theory preset sizes r from the loss, mu and the (alpha beta)^p order
    of the conditioner; the practical preset ignores the loss.

    Args:
        config: Coreset configuration
        n: Row universe of the stream
        d: Column dimension of the stream

    Returns:
        Mapping from sampler exponent to its sketch configuration
    """
    sizes = {
        q: coreset_config(
            config.mode, config.loss.name.value, n, d, config.k, q,
            eps=config.eps, delta=config.delta, mu=config.mu,
        )
        for q in config.exponents
    }
    total = sum(sketch.bucket_count for sketch in sizes.values())
    logger.debug(f"Sketch sizes for {config.loss}: {total} accumulators over {len(sizes)} samplers")
    return sizes
