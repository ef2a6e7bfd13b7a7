"""Run directories and JSON manifests."""

import json
import logging
import os
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..core.exceptions import StreamFormatError
from ..core.settings import get_settings

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT_VERSION = 1


def _to_json(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_json_atomic(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    """Write JSON through a temporary file and os.replace."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_to_json)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON object.

    Raises:
        StreamFormatError: If the file is missing or not a JSON mapping
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise StreamFormatError(f"cannot read {path}: {e}") from e
    if not isinstance(data, dict):
        raise StreamFormatError(f"{path} does not hold a JSON mapping")
    return data


def new_run_dir(command: str, parent: Optional[Union[str, Path]] = None) -> Path:
    """Create <parent>/<command>-<UTC timestamp>, parent defaulting to TURNSTILE_RUN_DIR."""
    base = Path(parent) if parent is not None else get_settings().run_dir
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    run_dir = base / f"{command}-{stamp}"
    run_dir.mkdir(parents=True, exist_ok=False)
    logger.info(f"Run directory {run_dir}")
    return run_dir


def write_manifest(
    run_dir: Union[str, Path], command: str, parameters: Dict[str, Any], **sections: Any
) -> Path:
    """Write manifest.json with the parameters needed to repeat a command.

    Args:
        run_dir: Directory of the run
        command: CLI command that produced the run
        parameters: Everything that determines the outputs (seed included)
        **sections: Further top-level entries such as timings or results
    """
    payload: Dict[str, Any] = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "command": command,
        "parameters": parameters,
        "timestamp_utc": datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
    }
    payload.update(sections)
    path = write_json_atomic(Path(run_dir) / MANIFEST_NAME, payload)
    logger.info(f"Wrote manifest {path}")
    return path
