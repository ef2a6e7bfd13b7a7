"""Process-level settings read from the environment."""

import logging
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from .exceptions import SketchValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Runtime settings shared by the sketch and coreset CLIs.

    Values come from ``TURNSTILE_*`` environment variables; a ``.env`` file in
    the working directory is honoured.
    """
    log_level: str = "INFO"
    run_dir: Path = Path("runs")
    max_workers: int = 4
    batch_size: int = 65536
    memory_fraction: float = 0.5

    def __post_init__(self):
        """Validate settings after initialization."""
        if self.max_workers < 1:
            raise SketchValidationError("TURNSTILE_MAX_WORKERS must be at least 1")
        if self.batch_size < 1:
            raise SketchValidationError("TURNSTILE_BATCH_SIZE must be at least 1")
        if not 0 < self.memory_fraction <= 1:
            raise SketchValidationError("TURNSTILE_MEMORY_FRACTION must be in (0, 1]")

    @classmethod
    def from_env(cls, dotenv_path: Optional[Path] = None) -> "Settings":
        """Build settings from the environment.

        Args:
            dotenv_path: Optional explicit .env file

        Returns:
            Settings instance

        Raises:
            SketchValidationError: If a variable cannot be parsed
        """
        load_dotenv(dotenv_path)
        try:
            settings = cls(
                log_level=os.getenv("TURNSTILE_LOG_LEVEL", "INFO").upper(),
                run_dir=Path(os.getenv("TURNSTILE_RUN_DIR", "runs")),
                max_workers=int(os.getenv("TURNSTILE_MAX_WORKERS", "4")),
                batch_size=int(os.getenv("TURNSTILE_BATCH_SIZE", "65536")),
                memory_fraction=float(os.getenv("TURNSTILE_MEMORY_FRACTION", "0.5")),
            )
        except ValueError as e:
            raise SketchValidationError(f"Invalid TURNSTILE_* setting: {e}") from e
        logger.debug(f"Loaded settings: {settings}")
        return settings


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return the process-wide settings, loaded once."""
    return Settings.from_env()
