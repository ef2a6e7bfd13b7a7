"""Conversion of labelled CSV datasets into turnstile streams."""

import csv
import logging
import math
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from turnstile_sketch.core.exceptions import SketchError
from turnstile_sketch.models.stream import StreamHeader
from turnstile_sketch.processors.synthetic import FoldKind, fold_labels
from turnstile_sketch.utils.stream_io import write_stream_arrays

from ..core.exceptions import CsvIngestionError

logger = logging.getLogger(__name__)


def _label_index(columns: List[str], label_column: Union[str, int], path: Path) -> int:
    if isinstance(label_column, int) or str(label_column).lstrip("-").isdigit():
        index = int(label_column)
        if not -len(columns) <= index < len(columns):
            raise CsvIngestionError(f"{path}: label column {index} outside the {len(columns)} columns")
        return index % len(columns)
    try:
        return columns.index(str(label_column))
    except ValueError as e:
        raise CsvIngestionError(f"{path}: no column named {label_column!r} in the header") from e


def read_labelled_csv(
    path: Union[str, Path],
    label_column: Union[str, int],
    has_header: bool = True,
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Read a numeric CSV into features X and labels y.

    Args:
        path: CSV file
        label_column: Header name or 0-based position of the label column
        has_header: Whether the first non-empty row names the columns

    Returns:
        (X, y) with the label column removed from X

    Raises:
        CsvIngestionError: On ragged rows or non-numeric cells, with line and column
    """
    path = Path(path)
    rows: List[List[float]] = []
    columns: List[str] = []
    label = None
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            for record in reader:
                if not record or all(not cell.strip() for cell in record):
                    continue
                if has_header and not columns:
                    columns = [cell.strip() for cell in record]
                    label = _label_index(columns, label_column, path)
                    continue
                if label is None:
                    columns = [str(c) for c in range(len(record))]
                    label = _label_index(columns, label_column, path)
                if len(record) != len(columns):
                    raise CsvIngestionError(
                        f"{path}, line {reader.line_num}: expected {len(columns)} cells, got {len(record)}"
                    )
                values = []
                for position, cell in enumerate(record):
                    try:
                        value = float(cell)
                    except ValueError as e:
                        raise CsvIngestionError(
                            f"{path}, line {reader.line_num}, column {position + 1}: "
                            f"non-numeric cell {cell!r}"
                        ) from e
                    if not math.isfinite(value):
                        raise CsvIngestionError(
                            f"{path}, line {reader.line_num}, column {position + 1}: non-finite cell {cell!r}"
                        )
                    values.append(value)
                rows.append(values)
    except OSError as e:
        raise CsvIngestionError(f"cannot read {path}: {e}") from e
    if not rows:
        raise CsvIngestionError(f"{path} holds no data rows")
    table = np.array(rows, dtype=np.float64)
    y = table[:, label]
    X = np.delete(table, label, axis=1)
    logger.info(f"Read {X.shape[0]} rows with {X.shape[1]} features from {path}")
    return X, y


def ingest_csv(
    path: Union[str, Path],
    label_column: Union[str, int],
    fold: Union[str, FoldKind],
    out: Union[str, Path],
    has_header: bool = True,
    binary: bool = False,
) -> Tuple[Path, StreamHeader]:
    """Fold a labelled CSV into A and write it as a stream, one update per nonzero entry.

    Args:
        path: CSV file
        label_column: Header name or 0-based position of the label column
        fold: Label fold of the target loss
        out: Stream file to write
        has_header: Whether the CSV has a header row
        binary: Write the binary LPTU1 format

    Returns:
        (stream path, header of the folded matrix)

    Raises:
        CsvIngestionError: If the CSV cannot be read or its labels cannot be folded
    """
    X, y = read_labelled_csv(path, label_column, has_header)
    try:
        A = fold_labels(X, y, fold)
        header = StreamHeader(n=A.shape[0], d=A.shape[1])
    except (SketchError, ValueError) as e:
        raise CsvIngestionError(f"{path}: {e}") from e
    rows, cols = np.nonzero(A)
    stream = write_stream_arrays(out, header, rows, cols, A[rows, cols], binary=binary)
    logger.info(f"Ingested {path} as a {header.n}x{header.d} {FoldKind(fold).value} stream ({rows.size} updates)")
    return stream, header
