"""Turnstile stream models."""

import math
from dataclasses import dataclass

from ..core.exceptions import SketchValidationError

STREAM_FORMAT_VERSION = 1


@dataclass(frozen=True)
class StreamHeader:
    """Declared dimensions of the implicit n x d matrix."""
    n: int
    d: int
    version: int = STREAM_FORMAT_VERSION

    def __post_init__(self):
        """Validate header after initialization."""
        if self.n < 1:
            raise SketchValidationError(f"n must be at least 1, got {self.n}")
        if self.d < 1:
            raise SketchValidationError(f"d must be at least 1, got {self.d}")
        if self.version != STREAM_FORMAT_VERSION:
            raise SketchValidationError(f"Unsupported stream format version {self.version}")


@dataclass(frozen=True)
class TurnstileUpdate:
    """One additive update A[i, j] += v."""
    i: int
    j: int
    v: float

    def validate(self, header: StreamHeader) -> "TurnstileUpdate":
        """Check indices against the header and the value for finiteness.

        Raises:
            SketchValidationError: If the update is out of range or not finite
        """
        if not 0 <= self.i < header.n:
            raise SketchValidationError(f"row index {self.i} outside [0, {header.n})")
        if not 0 <= self.j < header.d:
            raise SketchValidationError(f"column index {self.j} outside [0, {header.d})")
        if not math.isfinite(self.v):
            raise SketchValidationError(f"non-finite value {self.v} for entry ({self.i}, {self.j})")
        return self
