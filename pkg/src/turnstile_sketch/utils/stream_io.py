"""Turnstile stream files and weighted sample CSVs.

Text format (canonical)::

    # comment lines and blank lines are skipped
    n d
    i j v
    ...

Binary format: magic ``LPTU1``, little-endian u64 n and d, then 16-byte
records of u32 i, u32 j and f64 v.
"""

import csv
import io
import logging
import sys
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, List, Optional, TextIO, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..core.exceptions import SketchValidationError, StreamFormatError
from ..core.settings import get_settings
from ..models.sample import WeightedSample
from ..models.stream import StreamHeader, TurnstileUpdate

logger = logging.getLogger(__name__)

BINARY_MAGIC = b"LPTU1"
BINARY_HEADER = np.dtype([("n", "<u8"), ("d", "<u8")])
BINARY_RECORD = np.dtype([("i", "<u4"), ("j", "<u4"), ("v", "<f8")])
_U32_LIMIT = 2 ** 32

Source = Union[str, Path, BinaryIO, TextIO]
Batch = Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]


class StreamReader:
    """Reads a text or binary stream; iterating yields validated updates.

    The header is parsed on construction. ``"-"`` reads standard input.
    """

    def __init__(self, source: Source):
        self._owned: Optional[BinaryIO] = None
        if isinstance(source, (str, Path)) and str(source) == "-":
            handle: Union[BinaryIO, TextIO] = sys.stdin.buffer
            self.name = "<stdin>"
        elif isinstance(source, (str, Path)):
            try:
                handle = open(source, "rb")
            except OSError as e:
                raise StreamFormatError(f"cannot open stream {source}: {e}") from e
            self._owned = handle
            self.name = str(source)
        else:
            handle = source
            self.name = str(getattr(source, "name", "<stream>"))

        self._consumed = False
        self._line = 0
        if isinstance(handle, io.TextIOBase):
            self.binary = False
            self._text: Optional[TextIO] = handle
            self._raw: Optional[BinaryIO] = None
        else:
            self.binary = self._peek_magic(handle)
            self._raw = handle
            self._text = None if self.binary else io.TextIOWrapper(handle, encoding="utf-8")
        self.header = self._read_binary_header() if self.binary else self._read_text_header()
        logger.debug(
            f"Opened {'binary' if self.binary else 'text'} stream {self.name} "
            f"(n={self.header.n}, d={self.header.d})"
        )

    def __enter__(self) -> "StreamReader":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        """Close the file if this reader opened it."""
        if self._owned is not None:
            self._owned.close()
            self._owned = None

    @staticmethod
    def _peek_magic(handle: BinaryIO) -> bool:
        if hasattr(handle, "peek"):
            return handle.peek(len(BINARY_MAGIC))[:len(BINARY_MAGIC)] == BINARY_MAGIC
        start = handle.read(len(BINARY_MAGIC))
        handle.seek(-len(start), io.SEEK_CUR)
        return start == BINARY_MAGIC

    def _fail(self, where: str, message: str) -> StreamFormatError:
        return StreamFormatError(f"{self.name}: {where}: {message}")

    # ------------------------------------------------------------------ text

    def _next_text_line(self) -> Optional[List[str]]:
        assert self._text is not None
        for raw in self._text:
            self._line += 1
            stripped = raw.strip()
            if stripped and not stripped.startswith("#"):
                return stripped.split()
        return None

    def _read_text_header(self) -> StreamHeader:
        fields = self._next_text_line()
        if fields is None:
            raise self._fail("line 1", "missing 'n d' header")
        if len(fields) != 2:
            raise self._fail(f"line {self._line}", f"header needs 'n d', got {' '.join(fields)!r}")
        try:
            return StreamHeader(n=int(fields[0]), d=int(fields[1]))
        except (ValueError, SketchValidationError) as e:
            raise self._fail(f"line {self._line}", f"invalid header: {e}") from e

    def _text_batches(self, batch_size: int) -> Iterator[Batch]:
        rows: List[int] = []
        cols: List[int] = []
        values: List[float] = []
        lines: List[int] = []
        while True:
            fields = self._next_text_line()
            if fields is None:
                break
            if len(fields) != 3:
                raise self._fail(f"line {self._line}", f"expected 'i j v', got {' '.join(fields)!r}")
            try:
                rows.append(int(fields[0]))
                cols.append(int(fields[1]))
                values.append(float(fields[2]))
            except ValueError as e:
                raise self._fail(f"line {self._line}", f"malformed update: {e}") from e
            lines.append(self._line)
            if len(rows) >= batch_size:
                yield self._checked(rows, cols, values, lines, "line")
                rows, cols, values, lines = [], [], [], []
        if rows:
            yield self._checked(rows, cols, values, lines, "line")

    # ------------------------------------------------------------------ binary

    def _read_binary_header(self) -> StreamHeader:
        assert self._raw is not None
        data = self._raw.read(len(BINARY_MAGIC) + BINARY_HEADER.itemsize)
        if len(data) < len(BINARY_MAGIC) + BINARY_HEADER.itemsize:
            raise self._fail("header", "truncated binary header")
        header = np.frombuffer(data, dtype=BINARY_HEADER, offset=len(BINARY_MAGIC))[0]
        try:
            return StreamHeader(n=int(header["n"]), d=int(header["d"]))
        except SketchValidationError as e:
            raise self._fail("header", str(e)) from e

    def _binary_batches(self, batch_size: int) -> Iterator[Batch]:
        assert self._raw is not None
        record = 0
        while True:
            data = self._raw.read(batch_size * BINARY_RECORD.itemsize)
            if not data:
                break
            if len(data) % BINARY_RECORD.itemsize:
                whole = len(data) // BINARY_RECORD.itemsize
                raise self._fail(f"record {record + whole + 1}", "truncated record")
            block = np.frombuffer(data, dtype=BINARY_RECORD)
            numbers = np.arange(record + 1, record + block.size + 1)
            record += block.size
            yield self._checked(block["i"], block["j"], block["v"], numbers, "record")

    # ------------------------------------------------------------------ shared

    def _checked(
        self, rows: ArrayLike, cols: ArrayLike, values: ArrayLike, positions: ArrayLike, unit: str
    ) -> Batch:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        bad = (rows < 0) | (rows >= self.header.n) | (cols < 0) | (cols >= self.header.d)
        bad |= ~np.isfinite(values)
        if np.any(bad):
            first = int(np.flatnonzero(bad)[0])
            where = f"{unit} {int(np.asarray(positions)[first])}"
            try:
                TurnstileUpdate(int(rows[first]), int(cols[first]), float(values[first])).validate(
                    self.header
                )
            except SketchValidationError as e:
                raise self._fail(where, str(e)) from e
        return rows, cols, values

    def batches(self, batch_size: Optional[int] = None) -> Iterator[Batch]:
        """Validated (rows, cols, values) arrays of at most batch_size updates.

        Raises:
            StreamFormatError: On malformed lines, truncated records or
                out-of-range entries, naming the line or record number
        """
        if self._consumed:
            raise StreamFormatError(f"{self.name}: stream was already consumed")
        self._consumed = True
        size = batch_size or get_settings().batch_size
        if self.binary:
            return self._binary_batches(size)
        return self._text_batches(size)

    def __iter__(self) -> Iterator[TurnstileUpdate]:
        for rows, cols, values in self.batches():
            for i, j, v in zip(rows.tolist(), cols.tolist(), values.tolist()):
                yield TurnstileUpdate(i, j, v)


def parse_stream(source: Source) -> StreamReader:
    """Open a stream; iterate the result for TurnstileUpdate objects."""
    return StreamReader(source)


def iter_batches(source: Source, batch_size: Optional[int] = None) -> Iterator[Batch]:
    """Batches of a stream file; the header is validated but not returned."""
    with StreamReader(source) as reader:
        yield from reader.batches(batch_size)


def read_stream_arrays(source: Source) -> Tuple[StreamHeader, NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    """Whole stream as (header, rows, cols, values) in stream order."""
    with StreamReader(source) as reader:
        parts = list(reader.batches())
        header = reader.header
    if not parts:
        empty_int = np.zeros(0, dtype=np.int64)
        return header, empty_int, empty_int.copy(), np.zeros(0)
    rows, cols, values = (np.concatenate(column) for column in zip(*parts))
    return header, rows, cols, values


def write_stream_arrays(
    path: Union[str, Path],
    header: StreamHeader,
    rows: ArrayLike,
    cols: ArrayLike,
    values: ArrayLike,
    binary: bool = False,
) -> Path:
    """Write updates given as arrays; text values use repr so they read back exactly.

    Raises:
        StreamFormatError: If binary output is asked for indices beyond u32
    """
    path = Path(path)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if binary:
        if header.n > _U32_LIMIT or header.d > _U32_LIMIT:
            raise StreamFormatError(f"binary streams hold u32 indices, n={header.n} d={header.d} is too large")
        block = np.empty(rows.size, dtype=BINARY_RECORD)
        block["i"], block["j"], block["v"] = rows, cols, values
        head = np.array([(header.n, header.d)], dtype=BINARY_HEADER)
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(head.tobytes())
            fh.write(block.tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{header.n} {header.d}\n")
            for i, j, v in zip(rows.tolist(), cols.tolist(), values.tolist()):
                fh.write(f"{i} {j} {v!r}\n")
    logger.info(f"Wrote {rows.size} updates to {path} ({'binary' if binary else 'text'})")
    return path


def write_stream(
    path: Union[str, Path],
    header: StreamHeader,
    updates: Iterable[TurnstileUpdate],
    binary: bool = False,
) -> Path:
    """Write a sequence of updates."""
    updates = list(updates)
    return write_stream_arrays(
        path,
        header,
        [u.i for u in updates],
        [u.j for u in updates],
        [u.v for u in updates],
        binary=binary,
    )


def dense_from_arrays(
    header: StreamHeader, rows: ArrayLike, cols: ArrayLike, values: ArrayLike
) -> NDArray[np.float64]:
    """Accumulate updates into the n x d matrix in stream order."""
    matrix = np.zeros((header.n, header.d))
    np.add.at(matrix, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)),
              np.asarray(values, dtype=np.float64))
    return matrix


def replay_dense(source: Source) -> NDArray[np.float64]:
    """Exact matrix a stream describes."""
    header, rows, cols, values = read_stream_arrays(source)
    return dense_from_arrays(header, rows, cols, values)


def write_sample_csv(path: Union[str, Path], sample: WeightedSample) -> Path:
    """Write a weighted sample as CSV: index, weight, prob_estimate, x0..x{d-1}.

    A leading comment line records alpha and p.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# alpha={sample.alpha!r} p={sample.p!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["index", "weight", "prob_estimate"] + [f"x{c}" for c in range(sample.d)])
        for index, row, weight, prob in sample.entries:
            writer.writerow([index, repr(weight), repr(prob)] + [repr(float(x)) for x in row])
    logger.info(f"Wrote sample of {len(sample)} rows to {path}")
    return path


def read_sample_csv(path: Union[str, Path]) -> WeightedSample:
    """Read a sample written by write_sample_csv.

    Raises:
        StreamFormatError: If the file does not have the sample layout
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        meta = dict(item.split("=", 1) for item in first.lstrip("# ").split() if "=" in item)
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration as e:
            raise StreamFormatError(f"{path}: missing CSV header") from e
        if columns[:3] != ["index", "weight", "prob_estimate"]:
            raise StreamFormatError(f"{path}: not a sample CSV (columns {columns[:3]})")
        d = len(columns) - 3
        records = list(reader)
    try:
        table = np.array([[float(cell) for cell in record] for record in records]).reshape(len(records), d + 3)
        return WeightedSample(
            indices=table[:, 0].astype(np.int64),
            rows=table[:, 3:],
            weights=table[:, 1],
            prob_estimates=table[:, 2],
            alpha=float(meta.get("alpha", "nan")),
            p=float(meta.get("p", "nan")),
        )
    except (ValueError, SketchValidationError) as e:
        raise StreamFormatError(f"{path}: invalid sample CSV: {e}") from e
