"""Memory accounting for sketch allocations."""

import logging
from typing import Optional

import psutil

from ..core.exceptions import SketchResourceError
from ..core.settings import get_settings

logger = logging.getLogger(__name__)

FLOAT_BYTES = 8


def ensure_memory(nbytes: int, what: str, fraction: Optional[float] = None) -> None:
    """Refuse allocations larger than a fraction of the available memory.

    Args:
        nbytes: Size of the planned allocation
        what: Description used in the error message
        fraction: Allowed share of available memory, defaults to the
            TURNSTILE_MEMORY_FRACTION setting

    Raises:
        SketchResourceError: If the allocation exceeds the allowance
    """
    if fraction is None:
        fraction = get_settings().memory_fraction
    available = psutil.virtual_memory().available
    allowance = int(available * fraction)
    if nbytes > allowance:
        raise SketchResourceError(
            f"{what} needs {nbytes / 2**20:.1f} MiB but only {allowance / 2**20:.1f} MiB "
            f"({fraction:.0%} of available memory) may be used"
        )
    logger.debug(f"{what}: {nbytes / 2**20:.2f} MiB of {allowance / 2**20:.1f} MiB allowance")


def rss_mib() -> float:
    """Resident set size of this process in MiB."""
    return psutil.Process().memory_info().rss / 1024 / 1024
