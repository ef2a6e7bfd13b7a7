"""
Core module driving one pass of a stream through the sketches.
"""

import logging
import time
from typing import Optional

from ..models.sample import SamplerConfig, WeightedSample
from ..models.sketch import SketchConfig
from ..models.stream import StreamHeader
from ..processors.conditioning import Conditioner, EmbeddingSketch, finalize_conditioner
from ..processors.count_sketch import SketchState
from ..processors.lp_sampler import LpSampler, UniformSampler, union_mixture
from ..processors.parameters import DEFAULT_EMBEDDING_FACTOR
from ..utils.stream_io import StreamReader
from .exceptions import SketchValidationError
from .hashing import InstanceTag, SeedSet
from .settings import get_settings

logger = logging.getLogger(__name__)


def _check_dimensions(header: StreamHeader, n: int, d: int, what: str) -> None:
    if (header.n, header.d) != (n, d):
        raise SketchValidationError(
            f"{what} is sized for {n}x{d} but the stream declares {header.n}x{header.d}"
        )


class StreamSketcher:
    """Main interface for one-pass sketch operations on stream files."""

    def __init__(self, batch_size: Optional[int] = None):
        """Initialize with the ingestion batch size (TURNSTILE_BATCH_SIZE by default)."""
        self.batch_size = batch_size or get_settings().batch_size
        self.timings: dict = {}

    def sketch(self, reader: StreamReader, config: SketchConfig, seeds: SeedSet) -> SketchState:
        """CountSketch of the whole stream.

        Raises:
            SketchValidationError: If the config does not match the stream header
        """
        _check_dimensions(reader.header, config.n, config.d, "sketch")
        start = time.perf_counter()
        state = SketchState(config, seeds)
        for rows, cols, values in reader.batches(self.batch_size):
            state.update_batch(rows, cols, values)
        self.timings["sketch_seconds"] = time.perf_counter() - start
        logger.info(f"Sketched {state.update_count} updates from {reader.name} into {state!r}")
        return state

    def sample(
        self,
        reader: StreamReader,
        sampler_config: SamplerConfig,
        sketch_config: SketchConfig,
        master_seed: int,
    ) -> WeightedSample:
        """lp sample of the stream, optionally mixed with a uniform component.

        The uniform component has rate min(1, k/n) and is combined with
        union_mixture, each side pricing the rows the other one drew.
        """
        _check_dimensions(reader.header, sketch_config.n, sketch_config.d, "sampler")
        start = time.perf_counter()
        sampler = LpSampler(sampler_config, sketch_config, master_seed)
        uniform = None
        if sampler_config.uniform_mix:
            rate = min(1.0, sampler_config.k / sketch_config.n)
            uniform = UniformSampler(
                sketch_config.n, sketch_config.d, rate, SeedSet(master_seed, InstanceTag.UNIFORM)
            )
        for rows, cols, values in reader.batches(self.batch_size):
            sampler.ingest(rows, cols, values)
            if uniform is not None:
                uniform.ingest(rows, cols, values)
        self.timings["ingest_seconds"] = time.perf_counter() - start

        sample = sampler.sample()
        if uniform is not None:
            sample = union_mixture(
                sample, uniform.sample(), sampler.inclusion_probability, uniform.inclusion_probability
            )
        self.timings["sample_seconds"] = time.perf_counter() - start
        return sample

    def condition(
        self,
        reader: StreamReader,
        p: float,
        master_seed: int,
        rows: Optional[int] = None,
        factor: float = DEFAULT_EMBEDDING_FACTOR,
        tag: int = InstanceTag.P_EMBEDDING,
    ) -> Conditioner:
        """Subspace embedding of the stream finalized into a conditioner."""
        start = time.perf_counter()
        header = reader.header
        embedding = EmbeddingSketch(
            header.n, header.d, p, SeedSet(master_seed, int(tag)), rows=rows, factor=factor
        )
        for batch_rows, cols, values in reader.batches(self.batch_size):
            embedding.ingest(batch_rows, cols, values)
        conditioner = finalize_conditioner(embedding)
        self.timings["condition_seconds"] = time.perf_counter() - start
        return conditioner
