"""Turnstile lp row sampling on top of the heavy hitter sketch.

Rows are rescaled by t_i^(-1/p) with t_i uniform on (0, 1) before they enter
the sketch, so that a row becomes heavy with probability proportional to
||a_i||_p^p. In modified mode two independently scaled copies are kept: the
first fixes the threshold alpha, the second supplies the sample, which keeps
alpha independent of the drawn rows.
"""

import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..core.exceptions import (
    InsufficientHeavyHittersError,
    SketchError,
    SketchValidationError,
)
from ..core.hashing import InstanceTag, SeedSet, scale_of
from ..models.sample import SamplerConfig, SamplerMode, WeightedSample
from ..models.sketch import HeavyList, SketchConfig
from ..models.stream import TurnstileUpdate
from ..utils.norms import lp_pow
from .count_sketch import SketchState

logger = logging.getLogger(__name__)

# (indices, rows) -> inclusion probability of each row under one sampler
Pricer = Callable[[NDArray[np.int64], NDArray[np.float64]], NDArray[np.float64]]


def scale_factors(seeds: SeedSet, indices: ArrayLike, p: float) -> NDArray[np.float64]:
    """t_i^(-1/p) for an array of row indices."""
    t = np.asarray(scale_of(seeds, np.atleast_1d(np.asarray(indices, dtype=np.int64))))
    return t ** (-1.0 / p)


def scaled_update(
    upd: TurnstileUpdate, seeds: SeedSet, p: float, scale: Optional[float] = None
) -> TurnstileUpdate:
    """Forward an update with its value multiplied by t_i^(-1/p).

    Args:
        upd: Original update
        seeds: Seeds of the sketch copy the update is forwarded to
        p: Sampling exponent
        scale: Override for t_i, used by tests

    Returns:
        Scaled update for the same entry
    """
    t = scale_of(seeds, upd.i) if scale is None else scale
    return TurnstileUpdate(upd.i, upd.j, upd.v * t ** (-1.0 / p))


def select_alpha(heavy: HeavyList, rank: int, p: float) -> float:
    """Value of the rank-th largest ||a_tilde'_i||_p^p in the heavy list.

    Raises:
        InsufficientHeavyHittersError: If the list holds fewer than rank rows
    """
    if len(heavy) < rank:
        raise InsufficientHeavyHittersError(found=len(heavy), required=rank)
    norms = np.sort(heavy.norms_pow(p))[::-1]
    return float(norms[rank - 1])


def _inverse(P: NDArray[np.float64]) -> NDArray[np.float64]:
    if np.linalg.cond(P) > 1.0 / np.finfo(np.float64).eps:
        raise SketchValidationError("conditioner P is singular")
    return np.linalg.inv(P)


def draw_sample(
    heavy: HeavyList,
    alpha: float,
    seeds: SeedSet,
    p: float,
    P: Optional[ArrayLike] = None,
    P_inv: Optional[ArrayLike] = None,
) -> WeightedSample:
    """Keep heavy rows with ||a_tilde'_i||_p^p >= alpha and weight them.

    Args:
        heavy: Heavy list of the draw copy, in conditioned coordinates
        alpha: Threshold from select_alpha
        seeds: Seeds of the draw copy, used to undo the scaling
        p: Sampling exponent
        P: Conditioner that was post-multiplied into the sketch
        P_inv: Its inverse, computed from P when omitted

    Returns:
        WeightedSample whose rows are a_tilde_i P^-1

    Raises:
        SketchValidationError: If alpha is not positive or P is singular
    """
    if not alpha > 0.0:
        raise SketchValidationError(f"alpha must be positive, got {alpha}")
    keep = heavy.norms_pow(p) >= alpha
    indices = heavy.indices[keep]
    t = np.asarray(scale_of(seeds, indices))
    descaled = heavy.rows[keep] * (t ** (1.0 / p))[:, None]
    norms = lp_pow(descaled, p)
    probabilities = np.minimum(1.0, norms / alpha)
    rows = descaled
    if P is not None:
        inverse = _inverse(np.asarray(P, dtype=np.float64)) if P_inv is None else np.asarray(P_inv)
        rows = descaled @ inverse
    return WeightedSample(
        indices=indices,
        rows=rows,
        weights=1.0 / probabilities,
        prob_estimates=probabilities,
        alpha=alpha,
        p=p,
        norms_pow=norms,
    )


def estimate_total_norm(sample: WeightedSample) -> float:
    """Weighted estimate sum_i w_i ||a_tilde_i||_p^p of ||A||_p^p.

    Raises:
        SketchValidationError: If the sample is empty
    """
    if len(sample) == 0:
        raise SketchValidationError("cannot estimate a norm from an empty sample")
    norms = sample.norms_pow if sample.norms_pow is not None else lp_pow(sample.rows, sample.p)
    return float(np.sum(sample.weights * norms))


def _lookup(sample: WeightedSample, indices: NDArray[np.int64]) -> NDArray[np.int64]:
    """Position of every index in sample.indices, -1 when absent."""
    positions = np.full(indices.size, -1, dtype=np.int64)
    if len(sample) == 0:
        return positions
    order = np.argsort(sample.indices)
    sorted_indices = sample.indices[order]
    slots = np.clip(np.searchsorted(sorted_indices, indices), 0, sorted_indices.size - 1)
    hit = sorted_indices[slots] == indices
    positions[hit] = order[slots[hit]]
    return positions


def _component_probabilities(
    sample: WeightedSample,
    positions: NDArray[np.int64],
    indices: NDArray[np.int64],
    rows: NDArray[np.float64],
    pricer: Optional[Pricer],
) -> NDArray[np.float64]:
    drawn = positions >= 0
    probabilities = np.zeros(indices.size)
    probabilities[drawn] = sample.prob_estimates[positions[drawn]]
    if pricer is not None and np.any(~drawn):
        probabilities[~drawn] = pricer(indices[~drawn], rows[~drawn])
    return probabilities


def mixture_pricer(pricers: Sequence[Pricer]) -> Pricer:
    """Inclusion probability of a union of independent samplers, 1 - prod(1 - p_c)."""
    def price(indices: NDArray[np.int64], rows: NDArray[np.float64]) -> NDArray[np.float64]:
        miss = np.ones(indices.size)
        for pricer in pricers:
            miss *= 1.0 - pricer(indices, rows)
        return 1.0 - miss
    return price


def union_mixture(
    s1: WeightedSample,
    s2: WeightedSample,
    pricer1: Optional[Pricer] = None,
    pricer2: Optional[Pricer] = None,
) -> WeightedSample:
    """Union of two independent samples with combined probability p + p' - p p'.

    A sample's own estimate is used for the indices it drew; the pricer of
    the other sample estimates the probability it would have drawn them.
    Without a pricer that probability is taken as 0. Duplicate indices keep
    the row of s1.

    Args:
        s1: First sample (its rows win on duplicates)
        s2: Second sample
        pricer1: Inclusion probability under the sampler behind s1
        pricer2: Inclusion probability under the sampler behind s2

    Returns:
        Combined sample with weights max(1, 1 / combined probability)
    """
    indices = np.union1d(s1.indices, s2.indices)
    pos1 = _lookup(s1, indices)
    pos2 = _lookup(s2, indices)
    d = s1.d if len(s1) else s2.d
    rows = np.zeros((indices.size, d))
    rows[pos2 >= 0] = s2.rows[pos2[pos2 >= 0]]
    rows[pos1 >= 0] = s1.rows[pos1[pos1 >= 0]]

    p1 = _component_probabilities(s1, pos1, indices, rows, pricer1)
    p2 = _component_probabilities(s2, pos2, indices, rows, pricer2)
    combined = p1 + p2 - p1 * p2
    weights = np.maximum(1.0, 1.0 / combined)
    logger.debug(
        f"Union of {len(s1)} and {len(s2)} rows -> {indices.size} "
        f"({int(np.sum((pos1 >= 0) & (pos2 >= 0)))} duplicates)"
    )
    components = s1.metadata.get("components", [s1.metadata.get("component", "s1")])
    components = list(components) + list(
        s2.metadata.get("components", [s2.metadata.get("component", "s2")])
    )
    return WeightedSample(
        indices=indices,
        rows=rows,
        weights=weights,
        prob_estimates=np.minimum(combined, 1.0),
        alpha=s1.alpha,
        p=s1.p,
        metadata={"components": components},
    )


class UniformSampler:
    """Exact rows of a uniform index sample with rate k/n.

    Membership of row i is decided by t_i < rate under the UNIFORM instance
    tag; member rows bypass the sketch and are accumulated exactly.
    """

    def __init__(self, n: int, d: int, rate: float, seeds: SeedSet):
        if not 0.0 < rate <= 1.0:
            raise SketchValidationError(f"uniform rate must lie in (0, 1], got {rate}")
        self.n = n
        self.d = d
        self.rate = float(rate)
        self.seeds = seeds
        self._rows: Dict[int, NDArray[np.float64]] = {}

    def is_member(self, indices: ArrayLike) -> NDArray[np.bool_]:
        """Whether each row index belongs to the uniform sample."""
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        return np.asarray(scale_of(self.seeds, indices)) < self.rate

    def ingest(self, rows: ArrayLike, cols: ArrayLike, values: ArrayLike) -> "UniformSampler":
        """Accumulate the updates that touch member rows."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if rows.size == 0:
            return self
        member = self.is_member(rows)
        if not np.any(member):
            return self
        unique, inverse = np.unique(rows[member], return_inverse=True)
        block = np.zeros((unique.size, self.d))
        np.add.at(block, (inverse, cols[member]), values[member])
        for index, row in zip(unique.tolist(), block):
            existing = self._rows.get(index)
            self._rows[index] = row if existing is None else existing + row
        return self

    def merge(self, other: "UniformSampler") -> "UniformSampler":
        """Combine two shards of the same uniform sample."""
        if (self.seeds, self.rate, self.d) != (other.seeds, other.rate, other.d):
            raise SketchValidationError("cannot merge uniform samplers with different parameters")
        merged = UniformSampler(self.n, self.d, self.rate, self.seeds)
        merged._rows = {index: row.copy() for index, row in self._rows.items()}
        for index, row in other._rows.items():
            existing = merged._rows.get(index)
            merged._rows[index] = row.copy() if existing is None else existing + row
        return merged

    def inclusion_probability(
        self, indices: NDArray[np.int64], rows: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        """The rate, for every row."""
        return np.full(np.asarray(indices).size, self.rate)

    def sample(self) -> WeightedSample:
        """All touched member rows with weight 1/rate."""
        indices = np.array(sorted(self._rows), dtype=np.int64)
        rows = np.array([self._rows[i] for i in indices.tolist()]).reshape(indices.size, self.d)
        logger.info(f"Uniform component holds {indices.size} rows at rate {self.rate:.4g}")
        return WeightedSample(
            indices=indices,
            rows=rows,
            weights=np.full(indices.size, 1.0 / self.rate),
            prob_estimates=np.full(indices.size, self.rate),
            alpha=float("nan"),
            p=float("nan"),
            metadata={"component": "uniform", "rate": self.rate},
        )


def uniform_sample(
    n: int, rate: float, seeds: SeedSet, d: int, batches: Iterable[tuple]
) -> WeightedSample:
    """Uniform sample of a stream given as (rows, cols, values) batches."""
    sampler = UniformSampler(n, d, rate, seeds)
    for rows, cols, values in batches:
        sampler.ingest(rows, cols, values)
    return sampler.sample()


class LpSampler:
    """One lp sampler: one or two scaled sketch copies plus the drawn threshold."""

    def __init__(
        self,
        config: SamplerConfig,
        sketch_config: SketchConfig,
        master_seed: int,
        alpha_tag: int = InstanceTag.P_SAMPLER_ALPHA,
        draw_tag: int = InstanceTag.P_SAMPLER_DRAW,
        name: str = "lp",
    ):
        """Allocate the sketch copies.

        Raises:
            SketchValidationError: If sampler and sketch disagree on p
        """
        if sketch_config.p != config.p:
            raise SketchValidationError(
                f"sampler p={config.p} does not match sketch p={sketch_config.p}"
            )
        self.config = config
        self.sketch_config = sketch_config
        self.name = name
        self.draw_state = SketchState(sketch_config, SeedSet(master_seed, int(draw_tag)))
        self.alpha_state: Optional[SketchState] = None
        if config.mode is SamplerMode.MODIFIED:
            self.alpha_state = SketchState(sketch_config, SeedSet(master_seed, int(alpha_tag)))
        self.alpha: Optional[float] = None
        self._conditioner: Optional[NDArray[np.float64]] = None

    @property
    def copies(self) -> List[SketchState]:
        """Sketch copies fed by every update."""
        return [state for state in (self.alpha_state, self.draw_state) if state is not None]

    def ingest(self, rows: ArrayLike, cols: ArrayLike, values: ArrayLike) -> "LpSampler":
        """Forward a batch of updates, scaled per copy, into every copy."""
        rows = np.asarray(rows, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        for state in self.copies:
            state.update_batch(rows, cols, values * scale_factors(state.seeds, rows, self.config.p))
        return self

    def ingest_update(self, upd: TurnstileUpdate) -> "LpSampler":
        """Forward one update into every copy."""
        for state in self.copies:
            state.update(scaled_update(upd, state.seeds, self.config.p))
        return self

    def merge(self, other: "LpSampler") -> "LpSampler":
        """Combine two shards of the same sampler."""
        merged = LpSampler.__new__(LpSampler)
        merged.config = self.config
        merged.sketch_config = self.sketch_config
        merged.name = self.name
        merged.draw_state = self.draw_state.merge(other.draw_state)
        merged.alpha_state = (
            None if self.alpha_state is None or other.alpha_state is None
            else self.alpha_state.merge(other.alpha_state)
        )
        merged.alpha = None
        merged._conditioner = None
        return merged

    def _exhaustive_alpha(self, heavy: HeavyList, seeds: SeedSet) -> float:
        """Threshold under which every recovered row has probability 1."""
        if len(heavy) == 0:
            raise InsufficientHeavyHittersError(found=0, required=1)
        t = np.asarray(scale_of(seeds, heavy.indices))
        descaled = heavy.norms_pow(self.config.p) * t
        return float(np.min(descaled) * (1.0 - self.config.eps))

    def sample(
        self, P: Optional[ArrayLike] = None, P_inv: Optional[ArrayLike] = None
    ) -> WeightedSample:
        """Extract heavy rows, fix alpha and draw the weighted sample.

        When no more rows were touched than the threshold rank, every
        recovered row is returned with probability 1.

        Args:
            P: Conditioner to post-multiply, defaults to config.conditioner
            P_inv: Inverse of P, computed when omitted

        Returns:
            WeightedSample in original coordinates

        Raises:
            InsufficientHeavyHittersError: If too few heavy rows were recovered
        """
        if P is None and self.config.conditioner is not None:
            P = self.config.conditioner
        conditioner = None if P is None else np.asarray(P, dtype=np.float64)

        draw_state = self.draw_state if conditioner is None else self.draw_state.post_multiply(conditioner)
        heavy_draw = draw_state.extract_heavy()
        if self.alpha_state is not None:
            alpha_state = (
                self.alpha_state if conditioner is None
                else self.alpha_state.post_multiply(conditioner)
            )
            heavy_alpha = alpha_state.extract_heavy()
            alpha_seeds = self.alpha_state.seeds
        else:
            heavy_alpha = heavy_draw
            alpha_seeds = self.draw_state.seeds

        rank = self.config.k_alpha
        touched = self.draw_state.touched.size
        if touched <= rank:
            alpha = self._exhaustive_alpha(heavy_alpha, alpha_seeds)
            logger.info(f"{self.name}: {touched} touched rows <= rank {rank}, keeping all rows")
        else:
            alpha = select_alpha(heavy_alpha, rank, self.config.p)

        sample = draw_sample(heavy_draw, alpha, self.draw_state.seeds, self.config.p, conditioner, P_inv)
        sample.metadata.update(
            {
                "component": self.name,
                "mode": self.config.mode.value,
                "k": self.config.k,
                "rank": rank,
                "heavy_alpha": len(heavy_alpha),
                "heavy_draw": len(heavy_draw),
            }
        )
        self.alpha = alpha
        self._conditioner = conditioner
        logger.info(
            f"{self.name}: alpha={alpha:.6g} from {len(heavy_alpha)} heavy rows, "
            f"drew {len(sample)} of {len(heavy_draw)}"
        )
        return sample

    def inclusion_probability(
        self, indices: NDArray[np.int64], rows: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        """min(1, ||row P||_p^p / alpha) for rows in original coordinates.

        Raises:
            SketchError: If called before sample()
        """
        if self.alpha is None:
            raise SketchError(f"{self.name}: inclusion probabilities need a drawn sample")
        conditioned = rows if self._conditioner is None else rows @ self._conditioner
        return np.minimum(1.0, lp_pow(conditioned, self.config.p) / self.alpha)
