"""Heavy hitter sketch models."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..core.exceptions import SketchValidationError
from ..utils.norms import lp_pow

MAX_EPS = 1.0 / 20.0


@dataclass(frozen=True)
class SketchConfig:
    """Shape and accuracy parameters of a CountSketch over d-dimensional rows.

    Attributes:
        n: Declared row-index universe size
        d: Column dimension
        r: Buckets per repetition
        s: Number of repetitions
        p: Norm exponent in [1, 2]
        eps: Relative error in (0, 1/20]
        threshold_factor: Multiplier on M0 in the heavy test; None means
            the worst-case value (12/eps)^p
    """
    n: int
    d: int
    r: int
    s: int
    p: float = 1.0
    eps: float = MAX_EPS
    threshold_factor: Optional[float] = None

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.n < 1 or self.d < 1:
            raise SketchValidationError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if self.r < 1 or self.s < 1:
            raise SketchValidationError(f"r and s must be positive, got r={self.r}, s={self.s}")
        if not 1.0 <= self.p <= 2.0:
            raise SketchValidationError(f"p must lie in [1, 2], got {self.p}")
        if not 0.0 < self.eps <= MAX_EPS:
            raise SketchValidationError(f"eps must lie in (0, 1/20], got {self.eps}")
        if self.threshold_factor is not None and self.threshold_factor <= 0:
            raise SketchValidationError(
                f"threshold_factor must be positive, got {self.threshold_factor}"
            )

    @property
    def heavy_factor(self) -> float:
        """Factor applied to M0 when testing a median estimate."""
        if self.threshold_factor is not None:
            return float(self.threshold_factor)
        return (12.0 / self.eps) ** self.p

    @property
    def bucket_count(self) -> int:
        """Number of float64 accumulators the sketch holds."""
        return self.s * self.r * self.d

    def to_dict(self) -> Dict[str, Any]:
        """Plain dictionary for manifests."""
        return {
            "n": self.n,
            "d": self.d,
            "r": self.r,
            "s": self.s,
            "p": self.p,
            "eps": self.eps,
            "threshold_factor": self.threshold_factor,
        }


@dataclass
class HeavyList:
    """Rows that passed the heavy test, with their recovered vectors."""
    indices: NDArray[np.int64]
    rows: NDArray[np.float64]
    threshold_M0: float
    median_estimates: NDArray[np.float64] = field(
        default_factory=lambda: np.zeros(0, dtype=np.float64)
    )

    def __post_init__(self):
        """Validate list contents after initialization."""
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[0] != self.indices.shape[0]:
            raise SketchValidationError("HeavyList rows must be a (len(indices), d) matrix")
        if np.unique(self.indices).size != self.indices.size:
            raise SketchValidationError("HeavyList indices must be distinct")
        if not np.all(np.isfinite(self.rows)):
            raise SketchValidationError("HeavyList rows must be finite")

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def entries(self) -> List[Tuple[int, NDArray[np.float64]]]:
        """(index, recovered row) pairs."""
        return [(int(i), row) for i, row in zip(self.indices, self.rows)]

    def norms_pow(self, p: float) -> NDArray[np.float64]:
        """||a_tilde_i||_p^p for every entry."""
        return lp_pow(self.rows, p)

    def row_for(self, index: int) -> Optional[NDArray[np.float64]]:
        """Recovered row of an index, or None when it is not in the list."""
        hits = np.flatnonzero(self.indices == index)
        return self.rows[hits[0]] if hits.size else None
