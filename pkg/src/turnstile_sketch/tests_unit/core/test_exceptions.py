"""Unit tests for exceptions module."""

import pytest

from turnstile_sketch.core.exceptions import (
    ConditioningError,
    InsufficientHeavyHittersError,
    SketchError,
    SketchMergeError,
    SketchResourceError,
    SketchValidationError,
    StreamFormatError,
)


class TestSketchError:
    """Test SketchError base exception."""

    def test_sketch_error_creation(self):
        """Test creating SketchError with message."""
        error = SketchError("Test error message")
        assert str(error) == "Test error message"
        assert isinstance(error, Exception)

    @pytest.mark.parametrize("error_class", [
        SketchValidationError,
        StreamFormatError,
        SketchMergeError,
        ConditioningError,
        SketchResourceError,
    ])
    def test_subclasses_inherit_from_base(self, error_class):
        """Test every package error is a SketchError."""
        error = error_class("failed")
        assert isinstance(error, SketchError)
        assert str(error) == "failed"


class TestInsufficientHeavyHittersError:
    """Test InsufficientHeavyHittersError exception."""

    def test_carries_counts(self):
        """Test found and required counts are kept and named in the message."""
        error = InsufficientHeavyHittersError(found=3, required=24)
        assert error.found == 3
        assert error.required == 24
        assert "3" in str(error) and "24" in str(error)
        assert isinstance(error, SketchError)

    def test_can_be_caught_as_base(self):
        """Test catching through the base class."""
        with pytest.raises(SketchError):
            raise InsufficientHeavyHittersError(found=0, required=1)
