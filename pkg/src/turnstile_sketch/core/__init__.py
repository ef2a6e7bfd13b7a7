"""Core package for turnstile sketching."""

from .exceptions import (
    ConditioningError,
    InsufficientHeavyHittersError,
    SketchError,
    SketchMergeError,
    SketchResourceError,
    SketchValidationError,
    StreamFormatError,
)
from .hashing import InstanceTag, SeedSet, bucket_of, scale_of, sign_of
from .settings import Settings, get_settings

__all__ = [
    "SketchError",
    "SketchValidationError",
    "StreamFormatError",
    "SketchMergeError",
    "InsufficientHeavyHittersError",
    "ConditioningError",
    "SketchResourceError",
    "InstanceTag",
    "SeedSet",
    "bucket_of",
    "sign_of",
    "scale_of",
    "Settings",
    "get_settings",
]
