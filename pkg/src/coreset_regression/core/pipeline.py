"""
Core module building a weighted coreset from one pass over a turnstile stream.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from turnstile_sketch.core.exceptions import ConditioningError, SketchError
from turnstile_sketch.core.hashing import InstanceTag, SeedSet
from turnstile_sketch.core.settings import get_settings
from turnstile_sketch.models.sample import SamplerConfig, WeightedSample
from turnstile_sketch.models.stream import StreamHeader
from turnstile_sketch.processors.conditioning import (
    Conditioner,
    EmbeddingSketch,
    finalize_conditioner,
    measure_conditioning,
)
from turnstile_sketch.processors.lp_sampler import (
    LpSampler,
    UniformSampler,
    mixture_pricer,
    union_mixture,
)
from turnstile_sketch.utils.resources import rss_mib
from turnstile_sketch.utils.stream_io import parse_stream

from ..models.results import Coreset, CoresetConfig
from ..processors.sizing import sketch_sizes
from .exceptions import CoresetError

logger = logging.getLogger(__name__)

Batch = Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]

# (alpha tag, draw tag, embedding tag) per sampler role
_ROLE_TAGS = {
    "p": (InstanceTag.P_SAMPLER_ALPHA, InstanceTag.P_SAMPLER_DRAW, InstanceTag.P_EMBEDDING),
    "one": (InstanceTag.ONE_SAMPLER_ALPHA, InstanceTag.ONE_SAMPLER_DRAW, InstanceTag.ONE_EMBEDDING),
    "mixture": (InstanceTag.MIXTURE_ALPHA, InstanceTag.MIXTURE_DRAW, InstanceTag.MIXTURE_EMBEDDING),
}


@dataclass
class _Component:
    """One lp sampler with the subspace embedding that conditions it."""
    role: str
    exponent: float
    sampler: LpSampler
    embedding: Optional[EmbeddingSketch] = None
    conditioner: Optional[Conditioner] = None


def _roles(config: CoresetConfig) -> List[Tuple[str, float]]:
    own = config.loss.sampler_exponents
    roles = [("p", own[0])]
    if len(own) > 1:
        roles.append(("one", own[1]))
    roles.extend(("mixture", q) for q in config.exponents[len(own):])
    return roles


def matrix_batches(A: ArrayLike, batch_size: int) -> Iterable[Batch]:
    """Nonzero entries of a dense matrix as update batches in row-major order."""
    A = np.asarray(A, dtype=np.float64)
    rows, cols = np.nonzero(A)
    values = A[rows, cols]
    for lo in range(0, rows.size, batch_size):
        yield rows[lo:lo + batch_size], cols[lo:lo + batch_size], values[lo:lo + batch_size]


class CoresetPipeline:
    """Main interface for streaming coreset construction.

    Every sampler, embedding and the uniform component consumes the same
    batches; within a batch they run on a thread pool, each consumer owned
    by exactly one task.
    """

    def __init__(
        self,
        config: CoresetConfig,
        max_workers: Optional[int] = None,
        batch_size: Optional[int] = None,
    ):
        """Initialize the pipeline.

        Args:
            config: Coreset configuration
            max_workers: Thread pool size (TURNSTILE_MAX_WORKERS by default)
            batch_size: Updates per batch (TURNSTILE_BATCH_SIZE by default)
        """
        settings = get_settings()
        self.config = config
        self.max_workers = max_workers or settings.max_workers
        self.batch_size = batch_size or settings.batch_size
        self.timings: Dict[str, float] = {}
        self.components: List[_Component] = []
        self.uniform: Optional[UniformSampler] = None

    def _allocate(self, header: StreamHeader) -> None:
        config = self.config
        sizes = sketch_sizes(config, header.n, header.d)
        self.components = []
        for role, q in _roles(config):
            alpha_tag, draw_tag, embedding_tag = _ROLE_TAGS[role]
            sampler_config = SamplerConfig(
                k=config.k, p=q, eps=config.eps, delta=config.delta, mode=config.sampler_mode,
            )
            sampler = LpSampler(
                sampler_config, sizes[q], config.seed, alpha_tag, draw_tag, name=f"{role}-sampler(p={q:g})"
            )
            embedding = None
            if config.conditioned:
                embedding = EmbeddingSketch(
                    header.n, header.d, q, SeedSet(config.seed, int(embedding_tag)),
                    factor=config.embedding_factor,
                )
            self.components.append(_Component(role, q, sampler, embedding))
        self.uniform = None
        if config.uniform_mix:
            rate = min(1.0, config.k / header.n)
            self.uniform = UniformSampler(header.n, header.d, rate, SeedSet(config.seed, InstanceTag.UNIFORM))

    def _consumers(self) -> List[Tuple[str, Any]]:
        consumers: List[Tuple[str, Any]] = []
        for component in self.components:
            consumers.append((component.sampler.name, component.sampler))
            if component.embedding is not None:
                consumers.append((f"embedding(p={component.exponent:g})", component.embedding))
        if self.uniform is not None:
            consumers.append(("uniform", self.uniform))
        return consumers

    def _ingest(self, batches: Iterable[Batch]) -> int:
        consumers = self._consumers()
        count = 0
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            for rows, cols, values in batches:
                futures = {
                    executor.submit(consumer.ingest, rows, cols, values): name
                    for name, consumer in consumers
                }
                for future, name in futures.items():
                    try:
                        future.result()
                    except SketchError:
                        raise
                    except Exception as e:
                        raise CoresetError(f"{name} failed to ingest a batch: {e}") from e
                count += int(rows.size)
                logger.debug(f"Ingested batch of {rows.size} updates into {len(consumers)} consumers")
        return count

    def _condition(self, component: _Component) -> None:
        if component.embedding is None:
            return
        try:
            component.conditioner = finalize_conditioner(component.embedding)
        except ConditioningError as e:
            logger.warning(f"{component.sampler.name}: {e}; sampling without conditioning")
            component.conditioner = None

    def _draw(self, component: _Component) -> WeightedSample:
        cond = component.conditioner
        if cond is None:
            return component.sampler.sample()
        return component.sampler.sample(P=cond.R_inv, P_inv=cond.R)

    def build(self, header: StreamHeader, batches: Iterable[Batch]) -> Coreset:
        """Run every component over the batches and combine their samples.

        Args:
            header: Declared dimensions of the stream
            batches: (rows, cols, values) update batches

        Returns:
            Coreset whose weights are inverse combined inclusion probabilities

        Raises:
            InsufficientHeavyHittersError: If a sampler recovers too few rows
            CoresetError: If a consumer fails for another reason
        """
        config = self.config
        start = time.perf_counter()
        rss_before = rss_mib()
        self._allocate(header)
        count = self._ingest(batches)
        self.timings["ingest_seconds"] = time.perf_counter() - start

        for component in self.components:
            self._condition(component)
        self.timings["condition_seconds"] = time.perf_counter() - start - self.timings["ingest_seconds"]

        samples = [self._draw(component) for component in self.components]
        pricers = [component.sampler.inclusion_probability for component in self.components]
        combined = samples[0]
        for position in range(1, len(samples)):
            combined = union_mixture(
                combined, samples[position], mixture_pricer(pricers[:position]), pricers[position]
            )
        lp_pricer = mixture_pricer(pricers)
        if self.uniform is not None:
            combined = union_mixture(
                combined, self.uniform.sample(), lp_pricer, self.uniform.inclusion_probability
            )
        self.timings["sample_seconds"] = time.perf_counter() - start
        self.timings["total_seconds"] = self.timings["sample_seconds"]

        primary = self.components[0]
        mixed = any(component.role == "mixture" for component in self.components)
        provenance: Dict[str, Any] = {
            "method": "turnstile-mixture" if mixed else "turnstile",
            "config": config.to_dict(),
            "n": header.n,
            "d": header.d,
            "updates": count,
            "alpha": primary.sampler.alpha,
            "components": [
                {
                    "name": component.sampler.name,
                    "p": component.exponent,
                    "alpha": component.sampler.alpha,
                    "size": len(sample),
                    "sketch": component.sampler.sketch_config.to_dict(),
                    "conditioned": component.conditioner is not None,
                    "qr_residual": None if component.conditioner is None else component.conditioner.qr_residual,
                }
                for component, sample in zip(self.components, samples)
            ],
            "uniform_rate": None if self.uniform is None else self.uniform.rate,
            "timings": dict(self.timings),
            "rss_delta_mib": rss_mib() - rss_before,
        }
        coreset = Coreset.from_sample(combined, config.loss, **provenance)
        if config.measure_conditioning and primary.conditioner is not None and len(coreset):
            alpha_hat, beta_hat, exact = measure_conditioning(
                primary.conditioner, coreset.rows, coreset.weights, seed=config.seed
            )
            coreset.provenance["conditioning"] = {
                "alpha_hat": alpha_hat, "beta_hat": beta_hat, "beta_exact": exact,
            }
        logger.info(
            f"Coreset for {config.loss}: {len(coreset)} rows from {count} updates "
            f"in {self.timings['total_seconds']:.2f}s"
        )
        return coreset

    def build_from_stream(self, source: Union[str, Path]) -> Coreset:
        """Coreset of a stream file."""
        with parse_stream(source) as reader:
            return self.build(reader.header, reader.batches(self.batch_size))

    def build_from_matrix(self, A: ArrayLike) -> Coreset:
        """Coreset of an in-memory matrix, streamed one update per nonzero entry."""
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise CoresetError(f"expected an (n, d) matrix, got shape {A.shape}")
        header = StreamHeader(n=A.shape[0], d=A.shape[1])
        return self.build(header, matrix_batches(A, self.batch_size))


def build_coreset(
    source: Union[str, Path, ArrayLike],
    config: CoresetConfig,
    max_workers: Optional[int] = None,
) -> Coreset:
    """Coreset of a stream file or an in-memory matrix."""
    pipeline = CoresetPipeline(config, max_workers=max_workers)
    if isinstance(source, (str, Path)):
        return pipeline.build_from_stream(source)
    return pipeline.build_from_matrix(source)
