"""Exception classes for turnstile sketching."""


class SketchError(Exception):
    """Base exception for turnstile sketch errors."""
    pass


class SketchValidationError(SketchError):
    """Raised when a configuration, update or matrix fails validation."""
    pass


class StreamFormatError(SketchError):
    """Raised when a stream, snapshot or conditioner file is malformed."""
    pass


class SketchMergeError(SketchError):
    """Raised when sketches with different configuration or seeds are merged."""
    pass


class InsufficientHeavyHittersError(SketchError):
    """Raised when extraction yields fewer heavy rows than the sampler needs."""

    def __init__(self, found: int, required: int):
        self.found = found
        self.required = required
        super().__init__(
            f"Only {found} heavy rows recovered but {required} are required; "
            f"increase r/s or decrease k"
        )


class ConditioningError(SketchError):
    """Raised when the embedded matrix cannot produce an invertible conditioner."""
    pass


class SketchResourceError(SketchError):
    """Raised when a sketch would not fit into the allowed memory."""
    pass
