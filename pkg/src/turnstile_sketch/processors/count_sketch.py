"""Linear CountSketch over matrix rows and heavy row extraction.

Each of the s repetitions hashes row i into bucket h(i, j) with sign
sigma(i, j) and adds sigma(i, j) * x to that bucket's d-dimensional
accumulator. Extraction compares the lower-median per-repetition estimate of
||a_i||_p^p with a multiple of M0, the 0.65-quantile of the first-bucket norms,
and returns for every passing row the repetition closest (in median lp
distance) to all the others.
"""

import logging
import math
import struct
from functools import reduce
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..core.exceptions import SketchMergeError, SketchValidationError, StreamFormatError
from ..core.hashing import SeedSet, bucket_of, sign_of
from ..models.sketch import HeavyList, SketchConfig
from ..models.stream import TurnstileUpdate
from ..utils.norms import lp_pow
from ..utils.resources import FLOAT_BYTES, ensure_memory

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"LPTS1"
# magic, n, d, r, s, p, eps, threshold_factor (NaN when unset), seed, tag, update_count
_SNAPSHOT_HEADER = struct.Struct("<5sQQQQdddQQQ")
_COUNT = struct.Struct("<Q")

# Upper bound on the number of float64 temporaries per vectorized block
_BLOCK_ELEMENTS = 1 << 22

Batch = Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]


def percentile_rank(s: int) -> int:
    """1-based rank ceil(0.65 s) of M0 among the s first-bucket norms."""
    return -(-13 * s // 20)


def median_rank(s: int) -> int:
    """1-based rank ceil(s / 2) of the lower median."""
    return (s + 1) // 2


class SketchState:
    """s x r buckets of d-dimensional accumulators plus the seeds defining them.

    The state is a monoid under merge: shards sketched with the same config
    and seeds add up to the sketch of the concatenated stream. A single
    state must not be mutated from several threads at once.
    """

    def __init__(
        self,
        config: SketchConfig,
        seeds: SeedSet,
        buckets: Optional[NDArray[np.float64]] = None,
        update_count: int = 0,
        touched: Optional[ArrayLike] = None,
    ):
        """Initialize an empty sketch, or wrap existing buckets.

        Raises:
            SketchValidationError: If buckets have the wrong shape
            SketchResourceError: If a new sketch would not fit into memory
        """
        self.config = config
        self.seeds = seeds
        shape = (config.s, config.r, config.d)
        if buckets is None:
            ensure_memory(
                config.bucket_count * FLOAT_BYTES,
                f"sketch with s={config.s}, r={config.r}, d={config.d}",
            )
            buckets = np.zeros(shape, dtype=np.float64)
        elif buckets.shape != shape:
            raise SketchValidationError(f"buckets have shape {buckets.shape}, expected {shape}")
        self.buckets = buckets
        self.update_count = int(update_count)
        self._touched = (
            np.zeros(0, dtype=np.int64)
            if touched is None
            else np.unique(np.asarray(touched, dtype=np.int64))
        )

    @property
    def touched(self) -> NDArray[np.int64]:
        """Sorted row indices that received at least one update."""
        return self._touched

    def __repr__(self) -> str:
        return (
            f"SketchState(s={self.config.s}, r={self.config.r}, d={self.config.d}, "
            f"p={self.config.p}, tag={self.seeds.instance_tag}, updates={self.update_count})"
        )

    # ------------------------------------------------------------------ ingestion

    def _validate_entries(
        self, rows: NDArray[np.int64], cols: NDArray[np.int64], values: NDArray[np.float64]
    ) -> None:
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise SketchValidationError("rows, cols and values must be 1-d arrays of equal length")
        bad = np.flatnonzero((rows < 0) | (rows >= self.config.n))
        if bad.size:
            raise SketchValidationError(
                f"row index {rows[bad[0]]} outside [0, {self.config.n}) at batch position {bad[0]}"
            )
        bad = np.flatnonzero((cols < 0) | (cols >= self.config.d))
        if bad.size:
            raise SketchValidationError(
                f"column index {cols[bad[0]]} outside [0, {self.config.d}) at batch position {bad[0]}"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise SketchValidationError(
                f"non-finite value {values[bad[0]]} for row {rows[bad[0]]} at batch position {bad[0]}"
            )

    def update(self, upd: TurnstileUpdate) -> "SketchState":
        """Apply a single entry update A[i, j] += v."""
        return self.update_batch([upd.i], [upd.j], [upd.v])

    def update_batch(self, rows: ArrayLike, cols: ArrayLike, values: ArrayLike) -> "SketchState":
        """Apply entry updates in order.

        Args:
            rows: Row indices
            cols: Column indices
            values: Increments

        Returns:
            self, for chaining

        Raises:
            SketchValidationError: On out-of-range indices or non-finite values
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        self._validate_entries(rows, cols, values)
        if rows.size == 0:
            return self

        s, r, d = self.config.s, self.config.r, self.config.d
        repetitions = np.arange(s, dtype=np.int64)[:, None]
        chunk = max(1, _BLOCK_ELEMENTS // s)
        for lo in range(0, rows.size, chunk):
            part_rows = rows[lo:lo + chunk]
            buckets = bucket_of(self.seeds, part_rows[None, :], repetitions, r)
            signs = sign_of(self.seeds, part_rows[None, :], repetitions)
            flat = (repetitions * r + buckets) * d + cols[None, lo:lo + chunk]
            increments = np.bincount(
                flat.ravel(),
                weights=(signs * values[None, lo:lo + chunk]).ravel(),
                minlength=s * r * d,
            )
            self.buckets += increments.reshape(s, r, d)

        self.update_count += int(rows.size)
        self._touched = np.union1d(self._touched, rows)
        logger.debug(f"Ingested {rows.size} updates into {self!r}")
        return self

    def update_rows(self, indices: ArrayLike, row_matrix: ArrayLike) -> "SketchState":
        """Add full row increments x to rows i (one row of row_matrix per index)."""
        indices = np.asarray(indices, dtype=np.int64)
        row_matrix = np.asarray(row_matrix, dtype=np.float64).reshape(indices.size, self.config.d)
        d = self.config.d
        return self.update_batch(
            np.repeat(indices, d), np.tile(np.arange(d, dtype=np.int64), indices.size), row_matrix.ravel()
        )

    @classmethod
    def from_batches(
        cls, config: SketchConfig, seeds: SeedSet, batches: Iterable[Batch]
    ) -> "SketchState":
        """Sketch a whole stream given as (rows, cols, values) batches."""
        state = cls(config, seeds)
        for rows, cols, values in batches:
            state.update_batch(rows, cols, values)
        return state

    # ------------------------------------------------------------------ algebra

    def _check_compatible(self, other: "SketchState") -> None:
        if self.config != other.config:
            raise SketchMergeError(f"cannot merge sketches with configs {self.config} and {other.config}")
        if self.seeds != other.seeds:
            raise SketchMergeError(f"cannot merge sketches with seeds {self.seeds} and {other.seeds}")

    def merge(self, other: "SketchState") -> "SketchState":
        """Elementwise sum of two sketches of the same instance.

        Raises:
            SketchMergeError: If configuration or seeds differ
        """
        self._check_compatible(other)
        return SketchState(
            self.config,
            self.seeds,
            buckets=self.buckets + other.buckets,
            update_count=self.update_count + other.update_count,
            touched=np.union1d(self._touched, other._touched),
        )

    def post_multiply(self, P: ArrayLike) -> "SketchState":
        """Replace every bucket vector b with b P.

        Raises:
            SketchValidationError: If P is not a finite d x d matrix
        """
        matrix = np.asarray(P, dtype=np.float64)
        d = self.config.d
        if matrix.shape != (d, d):
            raise SketchValidationError(f"P must be {d}x{d}, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise SketchValidationError("P has non-finite entries")
        return SketchState(
            self.config,
            self.seeds,
            buckets=self.buckets @ matrix,
            update_count=self.update_count,
            touched=self._touched,
        )

    # ------------------------------------------------------------------ extraction

    def compute_M0(self) -> float:
        """0.65-quantile (rank ceil(0.65 s)) of ||B_{j,0}||_p^p over repetitions."""
        first = np.sort(lp_pow(self.buckets[:, 0, :], self.config.p))
        return float(first[percentile_rank(self.config.s) - 1])

    def candidate_estimates(self, candidates: ArrayLike) -> NDArray[np.float64]:
        """Per-repetition estimates sigma(i, j) B[j, h(i, j)], shape (s, m, d)."""
        candidates = np.asarray(candidates, dtype=np.int64)
        repetitions = np.arange(self.config.s, dtype=np.int64)[:, None]
        buckets = bucket_of(self.seeds, candidates[None, :], repetitions, self.config.r)
        signs = sign_of(self.seeds, candidates[None, :], repetitions)
        return signs[..., None] * self.buckets[repetitions, buckets]

    def median_estimates(self, candidates: ArrayLike) -> NDArray[np.float64]:
        """Lower median over repetitions of ||a_tilde_{i,j}||_p^p for each candidate."""
        values = lp_pow(self.candidate_estimates(candidates), self.config.p)
        return np.sort(values, axis=0)[median_rank(self.config.s) - 1]

    def _representatives(self, estimates: NDArray[np.float64]) -> NDArray[np.int64]:
        """Repetition minimizing the median distance to the others, per row.

        Args:
            estimates: (s, m, d) estimates of the passing rows

        Returns:
            (m,) repetition indices; ties go to the smallest index
        """
        s, m, d = estimates.shape
        chosen = np.empty(m, dtype=np.int64)
        chunk = max(1, _BLOCK_ELEMENTS // (s * s * d))
        rank = median_rank(s) - 1
        for lo in range(0, m, chunk):
            block = estimates[:, lo:lo + chunk, :].transpose(1, 0, 2)
            distances = lp_pow(block[:, :, None, :] - block[:, None, :, :], self.config.p)
            medians = np.partition(distances, rank, axis=2)[:, :, rank]
            chosen[lo:lo + chunk] = np.argmin(medians, axis=1)
        return chosen

    def extract_heavy(
        self, scan_all: bool = False, candidates: Optional[ArrayLike] = None
    ) -> HeavyList:
        """Rows whose median estimate reaches heavy_factor * M0.

        Args:
            scan_all: Test every index in [0, n) instead of the touched rows
            candidates: Explicit candidate indices, overrides scan_all

        Returns:
            HeavyList in increasing index order
        """
        m0 = self.compute_M0()
        threshold = self.config.heavy_factor * m0
        if candidates is not None:
            pool = np.unique(np.asarray(candidates, dtype=np.int64))
        elif scan_all:
            pool = np.arange(self.config.n, dtype=np.int64)
        else:
            pool = self._touched

        s, d = self.config.s, self.config.d
        found_indices, found_rows, found_medians = [], [], []
        chunk = max(1, _BLOCK_ELEMENTS // (s * d))
        for lo in range(0, pool.size, chunk):
            part = pool[lo:lo + chunk]
            estimates = self.candidate_estimates(part)
            medians = np.sort(lp_pow(estimates, self.config.p), axis=0)[median_rank(s) - 1]
            passing = np.flatnonzero((medians >= threshold) & (medians > 0.0))
            if passing.size == 0:
                continue
            heavy = estimates[:, passing, :]
            chosen = self._representatives(heavy)
            found_indices.append(part[passing])
            found_rows.append(heavy[chosen, np.arange(passing.size)])
            found_medians.append(medians[passing])

        if found_indices:
            indices = np.concatenate(found_indices)
            rows = np.concatenate(found_rows)
            medians = np.concatenate(found_medians)
        else:
            indices = np.zeros(0, dtype=np.int64)
            rows = np.zeros((0, d))
            medians = np.zeros(0)
        logger.info(
            f"Extracted {indices.size} heavy rows from {pool.size} candidates "
            f"(M0={m0:.6g}, threshold={threshold:.6g})"
        )
        return HeavyList(indices=indices, rows=rows, threshold_M0=m0, median_estimates=medians)

    # ------------------------------------------------------------------ snapshots

    def save_snapshot(self, path: Union[str, Path]) -> Path:
        """Write the LPTS1 binary snapshot.

        Layout: header, then s*r*d little-endian float64 values in
        (repetition, bucket, column) order, then a u64 count followed by the
        touched row indices as little-endian u64.
        """
        path = Path(path)
        config = self.config
        factor = math.nan if config.threshold_factor is None else config.threshold_factor
        with open(path, "wb") as fh:
            fh.write(
                _SNAPSHOT_HEADER.pack(
                    SNAPSHOT_MAGIC, config.n, config.d, config.r, config.s,
                    config.p, config.eps, factor,
                    self.seeds.master_seed, self.seeds.instance_tag, self.update_count,
                )
            )
            fh.write(self.buckets.astype("<f8").tobytes(order="C"))
            fh.write(_COUNT.pack(self._touched.size))
            fh.write(self._touched.astype("<u8").tobytes())
        logger.info(f"Saved snapshot of {self!r} to {path}")
        return path

    @classmethod
    def load_snapshot(cls, path: Union[str, Path]) -> "SketchState":
        """Read a snapshot written by save_snapshot.

        Raises:
            StreamFormatError: If the file is truncated or not a snapshot
        """
        path = Path(path)
        data = path.read_bytes()
        if len(data) < _SNAPSHOT_HEADER.size or data[:5] != SNAPSHOT_MAGIC:
            raise StreamFormatError(f"{path} is not an LPTS1 snapshot")
        (_, n, d, r, s, p, eps, factor, seed, tag, count) = _SNAPSHOT_HEADER.unpack_from(data, 0)
        try:
            config = SketchConfig(
                n=n, d=d, r=r, s=s, p=p, eps=eps,
                threshold_factor=None if math.isnan(factor) else factor,
            )
            seeds = SeedSet(master_seed=seed, instance_tag=tag)
        except SketchValidationError as e:
            raise StreamFormatError(f"{path}: invalid snapshot header: {e}") from e

        offset = _SNAPSHOT_HEADER.size
        body = s * r * d * FLOAT_BYTES
        if len(data) < offset + body + _COUNT.size:
            raise StreamFormatError(f"{path}: truncated bucket section")
        buckets = np.frombuffer(data, dtype="<f8", count=s * r * d, offset=offset)
        offset += body
        (n_touched,) = _COUNT.unpack_from(data, offset)
        offset += _COUNT.size
        if len(data) != offset + n_touched * 8:
            raise StreamFormatError(f"{path}: touched-index trailer has the wrong length")
        touched = np.frombuffer(data, dtype="<u8", count=n_touched, offset=offset).astype(np.int64)
        state = cls(
            config, seeds,
            buckets=buckets.astype(np.float64).reshape(s, r, d),
            update_count=count,
            touched=touched,
        )
        logger.info(f"Loaded snapshot {path}: {state!r}")
        return state


def merge_states(states: Iterable[SketchState]) -> SketchState:
    """Fold merge over several shard sketches."""
    return reduce(SketchState.merge, states)


def merge_snapshots(paths: Iterable[Union[str, Path]]) -> SketchState:
    """Load and merge snapshot files of stream shards."""
    return merge_states(SketchState.load_snapshot(path) for path in paths)
