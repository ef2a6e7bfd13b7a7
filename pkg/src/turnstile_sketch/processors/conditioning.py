"""Conditioning from a turnstile subspace embedding.

An embedding sketch Pi A is kept in parallel to the samplers. After the pass
the QR decomposition Pi A = Q R gives R, and U = A R^-1 is well conditioned in
lp, so that row norms of A R^-1 bound the lp leverage scores.

p = 2 uses a CountSketch embedding. For p in [1, 2) the embedding is a dense
matrix of p-stable variables generated from hashes with the
Chambers-Mallows-Stuck transform and never stored.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse
from numpy.typing import ArrayLike, NDArray

from ..core.exceptions import (
    ConditioningError,
    SketchMergeError,
    SketchValidationError,
    StreamFormatError,
)
from ..core.hashing import HashDomain, SeedSet, bucket_of, sign_of, uniform_of
from ..models.stream import TurnstileUpdate
from ..utils.norms import dual_exponent, lp_norm, lp_pow, lq_norm
from .parameters import DEFAULT_EMBEDDING_FACTOR, embedding_rows

logger = logging.getLogger(__name__)

STABLE_MEDIAN_DRAWS = 10 ** 6
STABLE_MEDIAN_SEED = 0x5EED
DEFAULT_DIRECTIONS = 10 ** 4
_BLOCK_ELEMENTS = 1 << 22


class EmbeddingKind(str, Enum):
    """How Pi is generated."""
    DENSE_P_STABLE = "dense-p-stable"
    COUNTSKETCH_L2 = "countsketch-l2"


def stable_variates(
    p: float, u_angle: NDArray[np.float64], u_exponential: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Symmetric p-stable variables from two open-interval uniforms.

    Chambers-Mallows-Stuck: theta = pi (u - 1/2), W = -ln u',
    X = sin(p theta) / cos(theta)^(1/p) * (cos((1 - p) theta) / W)^((1 - p) / p);
    p = 1 reduces to tan(theta).
    """
    theta = math.pi * (np.asarray(u_angle) - 0.5)
    if p == 1.0:
        return np.tan(theta)
    w = -np.log(np.asarray(u_exponential))
    return (
        np.sin(p * theta) / np.cos(theta) ** (1.0 / p)
        * (np.cos((1.0 - p) * theta) / w) ** ((1.0 - p) / p)
    )


@lru_cache(maxsize=None)
def stable_median_abs(p: float) -> float:
    """Median of |X| for a standard p-stable X, estimated once from 10^6 draws."""
    rng = np.random.default_rng(STABLE_MEDIAN_SEED)
    scale = float(2 ** 52)
    u_angle = (rng.integers(0, 2 ** 52, STABLE_MEDIAN_DRAWS) + 0.5) / scale
    u_exponential = (rng.integers(0, 2 ** 52, STABLE_MEDIAN_DRAWS) + 0.5) / scale
    median = float(np.median(np.abs(stable_variates(p, u_angle, u_exponential))))
    logger.debug(f"median |p-stable| for p={p}: {median:.6f}")
    return median


class EmbeddingSketch:
    """Linear sketch Pi A with r_e rows, fed by the same turnstile updates."""

    def __init__(
        self,
        n: int,
        d: int,
        p: float,
        seeds: SeedSet,
        rows: Optional[int] = None,
        factor: float = DEFAULT_EMBEDDING_FACTOR,
    ):
        if n < 1 or d < 1:
            raise SketchValidationError(f"n and d must be positive, got n={n}, d={d}")
        if not 1.0 <= p <= 2.0:
            raise SketchValidationError(f"p must lie in [1, 2], got {p}")
        self.n = n
        self.d = d
        self.p = float(p)
        self.seeds = seeds
        self.kind = EmbeddingKind.COUNTSKETCH_L2 if p == 2.0 else EmbeddingKind.DENSE_P_STABLE
        self.pi_rows = int(rows) if rows is not None else embedding_rows(d, p, factor)
        if self.pi_rows < 1:
            raise SketchValidationError(f"embedding needs at least one row, got {self.pi_rows}")
        self.matrix = np.zeros((self.pi_rows, d), dtype=np.float64)
        self.update_count = 0
        self._scale = 1.0
        if self.kind is EmbeddingKind.DENSE_P_STABLE:
            self._scale = 1.0 / (stable_median_abs(self.p) * self.pi_rows ** (1.0 / self.p))

    def __repr__(self) -> str:
        return f"EmbeddingSketch(kind={self.kind.value}, rows={self.pi_rows}, d={self.d}, p={self.p})"

    def pi_columns(self, indices: ArrayLike) -> NDArray[np.float64]:
        """Dense columns Pi[:, i] for the given row indices, shape (r_e, m)."""
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        if self.kind is EmbeddingKind.COUNTSKETCH_L2:
            columns = np.zeros((self.pi_rows, indices.size))
            buckets = bucket_of(self.seeds, indices, 0, self.pi_rows)
            columns[buckets, np.arange(indices.size)] = sign_of(self.seeds, indices, 0)
            return columns
        embedding_row = np.arange(self.pi_rows, dtype=np.int64)[:, None]
        u_angle = uniform_of(self.seeds, HashDomain.STABLE_ANGLE, indices[None, :], embedding_row)
        u_exponential = uniform_of(
            self.seeds, HashDomain.STABLE_EXPONENTIAL, indices[None, :], embedding_row
        )
        return self._scale * stable_variates(self.p, u_angle, u_exponential)

    def ingest(self, rows: ArrayLike, cols: ArrayLike, values: ArrayLike) -> "EmbeddingSketch":
        """Apply a batch of updates: column j of Pi A gains v * Pi[:, i].

        Raises:
            SketchValidationError: On out-of-range indices or non-finite values
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if rows.size == 0:
            return self
        if np.any((rows < 0) | (rows >= self.n)) or np.any((cols < 0) | (cols >= self.d)):
            raise SketchValidationError("embedding update index out of range")
        if not np.all(np.isfinite(values)):
            raise SketchValidationError("embedding update value is not finite")

        if self.kind is EmbeddingKind.COUNTSKETCH_L2:
            buckets = bucket_of(self.seeds, rows, 0, self.pi_rows)
            signs = sign_of(self.seeds, rows, 0)
            increments = np.bincount(
                buckets * self.d + cols, weights=signs * values, minlength=self.pi_rows * self.d
            )
            self.matrix += increments.reshape(self.pi_rows, self.d)
        else:
            chunk = max(1, _BLOCK_ELEMENTS // self.pi_rows)
            for lo in range(0, rows.size, chunk):
                part_rows, part_cols = rows[lo:lo + chunk], cols[lo:lo + chunk]
                part_values = values[lo:lo + chunk]
                unique, inverse = np.unique(part_rows, return_inverse=True)
                columns = self.pi_columns(unique)
                for column in range(self.d):
                    mask = part_cols == column
                    if np.any(mask):
                        self.matrix[:, column] += columns[:, inverse[mask]] @ part_values[mask]
        self.update_count += int(rows.size)
        return self

    def embed_update(self, upd: TurnstileUpdate) -> "EmbeddingSketch":
        """Apply a single update."""
        return self.ingest([upd.i], [upd.j], [upd.v])

    def merge(self, other: "EmbeddingSketch") -> "EmbeddingSketch":
        """Sum of two shard embeddings of the same instance.

        Raises:
            SketchMergeError: If the embeddings differ in shape, p or seeds
        """
        if (self.n, self.d, self.p, self.pi_rows, self.seeds) != (
            other.n, other.d, other.p, other.pi_rows, other.seeds
        ):
            raise SketchMergeError(f"cannot merge {self!r} with {other!r}")
        merged = EmbeddingSketch(self.n, self.d, self.p, self.seeds, rows=self.pi_rows)
        merged.matrix = self.matrix + other.matrix
        merged.update_count = self.update_count + other.update_count
        return merged

    @classmethod
    def from_matrix(
        cls, A: ArrayLike, p: float, seeds: SeedSet, rows: Optional[int] = None,
        factor: float = DEFAULT_EMBEDDING_FACTOR,
    ) -> "EmbeddingSketch":
        """Embed a dense in-memory matrix, one update per nonzero entry."""
        A = np.asarray(A, dtype=np.float64)
        sketch = cls(A.shape[0], A.shape[1], p, seeds, rows=rows, factor=factor)
        row_index, col_index = np.nonzero(A)
        return sketch.ingest(row_index, col_index, A[row_index, col_index])


@dataclass(frozen=True, eq=False)
class Conditioner:
    """Upper-triangular R with positive diagonal and its inverse P = R^-1."""
    R: NDArray[np.float64]
    R_inv: NDArray[np.float64]
    p: float
    kind: str
    master_seed: int
    instance_tag: int
    embedding_rows: int
    qr_residual: float
    alpha_emp: Optional[float] = None
    beta_emp: Optional[float] = None
    beta_exact: bool = False

    @property
    def d(self) -> int:
        """Column dimension."""
        return int(self.R.shape[0])

    def with_measurements(self, alpha: float, beta: float, exact: bool) -> "Conditioner":
        """Copy carrying measured alpha and beta."""
        return replace(self, alpha_emp=alpha, beta_emp=beta, beta_exact=exact)


def finalize_conditioner(sk: EmbeddingSketch) -> Conditioner:
    """QR of the embedded matrix with a positive-diagonal R.

    Raises:
        ConditioningError: If the embedded matrix does not have full column rank
    """
    M = sk.matrix
    d = sk.d
    if sk.pi_rows < d:
        raise ConditioningError(
            f"embedding has {sk.pi_rows} rows for d={d}: {d - sk.pi_rows} columns deficient"
        )
    if not np.all(np.isfinite(M)):
        raise ConditioningError("embedded matrix has non-finite entries")
    Q, R = scipy.linalg.qr(M, mode="economic")
    diagonal = np.abs(np.diag(R))
    tolerance = max(M.shape) * np.finfo(np.float64).eps * (diagonal.max() if diagonal.size else 0.0)
    deficient = int(np.sum(diagonal <= tolerance))
    if deficient:
        raise ConditioningError(
            f"embedded matrix is rank deficient: {deficient} of {d} columns deficient"
        )
    signs = np.sign(np.diag(R))
    R = signs[:, None] * R
    Q = Q * signs[None, :]
    R_inv = scipy.linalg.solve_triangular(R, np.eye(d), lower=False)
    norm = np.linalg.norm(M, "fro")
    residual = float(np.linalg.norm(M - Q @ R, "fro") / norm) if norm > 0 else 0.0
    logger.info(
        f"Conditioner from {sk!r}: cond(R)={np.linalg.cond(R):.3g}, QR residual={residual:.2e}"
    )
    return Conditioner(
        R=R,
        R_inv=R_inv,
        p=sk.p,
        kind=sk.kind.value,
        master_seed=sk.seeds.master_seed,
        instance_tag=sk.seeds.instance_tag,
        embedding_rows=sk.pi_rows,
        qr_residual=residual,
    )


def leverage_bounds(
    cond: Conditioner, rows: ArrayLike, beta: Optional[float] = None
) -> NDArray[np.float64]:
    """Upper bounds beta^p ||a_i R^-1||_p^p on the lp leverage scores.

    Args:
        cond: Conditioner
        rows: Rows a_i (exact or recovered)
        beta: Conditioning constant, defaults to the measured cond.beta_emp

    Raises:
        ConditioningError: If no beta is given and none was measured
    """
    if beta is None:
        beta = cond.beta_emp
    if beta is None:
        raise ConditioningError("leverage bounds need beta; run measure_conditioning first")
    U = np.asarray(rows, dtype=np.float64) @ cond.R_inv
    return beta ** cond.p * lp_pow(U, cond.p)


def _beta_l1(U: NDArray[np.float64]) -> float:
    """max over z of ||z||_inf / ||U z||_1, one linear program per coordinate."""
    m, d = U.shape
    identity = scipy.sparse.identity(m, format="csr")
    basis = scipy.sparse.csr_matrix(U)
    A_ub = scipy.sparse.vstack(
        [scipy.sparse.hstack([basis, -identity]), scipy.sparse.hstack([-basis, -identity])],
        format="csr",
    )
    b_ub = np.zeros(2 * m)
    cost = np.concatenate([np.zeros(d), np.ones(m)])
    bounds = [(-1.0, 1.0)] * d + [(0.0, None)] * m
    best = 0.0
    for coordinate in range(d):
        A_eq = np.zeros((1, d + m))
        A_eq[0, coordinate] = 1.0
        result = scipy.optimize.linprog(
            cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs"
        )
        if result.status != 0:
            raise ConditioningError(f"beta linear program failed: {result.message}")
        if result.fun <= 0:
            return math.inf
        best = max(best, 1.0 / result.fun)
    return best


def _beta_sampled(
    U: NDArray[np.float64], p: float, n_directions: int, seed: int
) -> float:
    """Lower bound on beta from Gaussian and coordinate directions."""
    q = dual_exponent(p)
    d = U.shape[1]
    rng = np.random.default_rng(seed)
    directions = np.vstack([np.eye(d), rng.standard_normal((n_directions, d))])
    best = 0.0
    chunk = max(1, _BLOCK_ELEMENTS // max(U.shape[0], 1))
    for lo in range(0, directions.shape[0], chunk):
        Z = directions[lo:lo + chunk]
        image = lp_norm((U @ Z.T).T, p)
        with np.errstate(divide="ignore"):
            best = max(best, float(np.max(lq_norm(Z, q) / image)))
    return best


def measure_conditioning(
    cond: Conditioner,
    rows: ArrayLike,
    weights: Optional[ArrayLike] = None,
    n_directions: int = DEFAULT_DIRECTIONS,
    seed: int = 0,
) -> Tuple[float, float, bool]:
    """Empirical alpha = ||U||_p and beta with ||z||_q <= beta ||U z||_p.

    U = diag(w)^(1/p) rows R^-1. beta is exact for p = 2 (inverse smallest
    singular value) and p = 1 (linear programs); otherwise it is the largest
    ratio over sampled directions and therefore only a lower bound.

    Returns:
        (alpha, beta, beta_is_exact)
    """
    p = cond.p
    U = np.asarray(rows, dtype=np.float64) @ cond.R_inv
    if weights is not None:
        U = U * np.asarray(weights, dtype=np.float64)[:, None] ** (1.0 / p)
    alpha = float(lp_pow(U.ravel(), p) ** (1.0 / p))
    if p == 2.0:
        smallest = float(np.linalg.svd(U, compute_uv=False).min())
        beta, exact = (math.inf if smallest == 0 else 1.0 / smallest), True
    elif p == 1.0:
        beta, exact = _beta_l1(U), True
    else:
        beta, exact = _beta_sampled(U, p, n_directions, seed), False
    logger.info(
        f"Conditioning p={p}: alpha={alpha:.4g}, beta={beta:.4g} "
        f"({'exact' if exact else 'sampled lower bound'})"
    )
    return alpha, beta, exact


def save_conditioner(cond: Conditioner, path: Union[str, Path]) -> Path:
    """Write R, R^-1 and metadata to an .npz file."""
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    np.savez(
        path,
        R=cond.R,
        R_inv=cond.R_inv,
        p=np.float64(cond.p),
        kind=np.str_(cond.kind),
        master_seed=np.uint64(cond.master_seed),
        instance_tag=np.int64(cond.instance_tag),
        embedding_rows=np.int64(cond.embedding_rows),
        qr_residual=np.float64(cond.qr_residual),
        alpha_emp=np.float64(math.nan if cond.alpha_emp is None else cond.alpha_emp),
        beta_emp=np.float64(math.nan if cond.beta_emp is None else cond.beta_emp),
        beta_exact=np.bool_(cond.beta_exact),
    )
    logger.info(f"Saved conditioner to {path}")
    return path


def load_conditioner(path: Union[str, Path]) -> Conditioner:
    """Read a conditioner written by save_conditioner.

    Raises:
        StreamFormatError: If the file lacks a field or R is not square
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            R = np.array(data["R"], dtype=np.float64)
            R_inv = np.array(data["R_inv"], dtype=np.float64)
            alpha = float(data["alpha_emp"])
            beta = float(data["beta_emp"])
            cond = Conditioner(
                R=R,
                R_inv=R_inv,
                p=float(data["p"]),
                kind=str(data["kind"]),
                master_seed=int(data["master_seed"]),
                instance_tag=int(data["instance_tag"]),
                embedding_rows=int(data["embedding_rows"]),
                qr_residual=float(data["qr_residual"]),
                alpha_emp=None if math.isnan(alpha) else alpha,
                beta_emp=None if math.isnan(beta) else beta,
                beta_exact=bool(data["beta_exact"]),
            )
    except (KeyError, ValueError, OSError) as e:
        raise StreamFormatError(f"{path} is not a conditioner file: {e}") from e
    if R.ndim != 2 or R.shape[0] != R.shape[1] or R_inv.shape != R.shape:
        raise StreamFormatError(f"{path}: R must be square and match R_inv")
    return cond
