"""Package initialization for CLI modules."""

from .main import cli

__all__ = ['cli']
