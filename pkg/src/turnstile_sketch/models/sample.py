"""Sampler configuration and weighted sample models."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..core.exceptions import SketchValidationError
from .sketch import MAX_EPS


class SamplerMode(str, Enum):
    """Single-copy or two-copy sampling."""
    PLAIN = "plain"
    MODIFIED = "modified"


@dataclass
class SamplerConfig:
    """Configuration of one lp sampler.

    Attributes:
        k: Target sample size
        p: Norm exponent in [1, 2]
        eps: Accuracy parameter in (0, 1/20]
        delta: Failure probability in (0, 1)
        mode: PLAIN returns the top-k, MODIFIED draws from an independent copy
        uniform_mix: Whether a uniform component is mixed in
        conditioner: Optional d x d matrix P post-multiplied into the sketch
    """
    k: int
    p: float = 1.0
    eps: float = MAX_EPS
    delta: float = 0.05
    mode: SamplerMode = SamplerMode.MODIFIED
    uniform_mix: bool = False
    conditioner: Optional[NDArray[np.float64]] = None

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.mode = SamplerMode(self.mode)
        if self.k < 1:
            raise SketchValidationError(f"k must be at least 1, got {self.k}")
        if not 1.0 <= self.p <= 2.0:
            raise SketchValidationError(f"p must lie in [1, 2], got {self.p}")
        if not 0.0 < self.eps <= MAX_EPS:
            raise SketchValidationError(f"eps must lie in (0, 1/20], got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise SketchValidationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.conditioner is not None:
            self.conditioner = np.asarray(self.conditioner, dtype=np.float64)
            if self.conditioner.ndim != 2 or self.conditioner.shape[0] != self.conditioner.shape[1]:
                raise SketchValidationError("conditioner must be a square matrix")

    @property
    def k_alpha(self) -> int:
        """Rank of the threshold: ceil(1.5 k) in modified mode, k in plain mode."""
        if self.mode is SamplerMode.MODIFIED:
            return (3 * self.k + 1) // 2
        return self.k


@dataclass
class WeightedSample:
    """Sampled rows with weights and estimated inclusion probabilities.

    ``rows`` are returned in the original coordinates (a_tilde_i P^-1);
    ``norms_pow`` keeps ||a_tilde_i||_p^p in the conditioned coordinates the
    weights were computed from.
    """
    indices: NDArray[np.int64]
    rows: NDArray[np.float64]
    weights: NDArray[np.float64]
    prob_estimates: NDArray[np.float64]
    alpha: float
    p: float
    norms_pow: Optional[NDArray[np.float64]] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Validate sample contents after initialization."""
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.prob_estimates = np.asarray(self.prob_estimates, dtype=np.float64)
        m = self.indices.size
        if self.rows.ndim != 2 or self.rows.shape[0] != m:
            raise SketchValidationError("sample rows must be a (len(indices), d) matrix")
        if self.weights.shape != (m,) or self.prob_estimates.shape != (m,):
            raise SketchValidationError("weights and prob_estimates must match the indices")
        if np.unique(self.indices).size != m:
            raise SketchValidationError("sample indices must be distinct")
        if np.any(self.weights < 1.0):
            raise SketchValidationError("sample weights must be at least 1")
        if np.any((self.prob_estimates <= 0.0) | (self.prob_estimates > 1.0)):
            raise SketchValidationError("prob_estimates must lie in (0, 1]")
        if self.norms_pow is not None:
            self.norms_pow = np.asarray(self.norms_pow, dtype=np.float64)

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def d(self) -> int:
        """Row dimension."""
        return int(self.rows.shape[1])

    @property
    def entries(self) -> List[Tuple[int, NDArray[np.float64], float, float]]:
        """(index, row, weight, prob_estimate) tuples."""
        return [
            (int(i), row, float(w), float(q))
            for i, row, w, q in zip(self.indices, self.rows, self.weights, self.prob_estimates)
        ]

    @classmethod
    def empty(cls, d: int, p: float, alpha: float = 0.0) -> "WeightedSample":
        """Sample without entries."""
        return cls(
            indices=np.zeros(0, dtype=np.int64),
            rows=np.zeros((0, d)),
            weights=np.zeros(0),
            prob_estimates=np.zeros(0),
            alpha=alpha,
            p=p,
            norms_pow=np.zeros(0),
        )
