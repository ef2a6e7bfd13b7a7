"""In-memory coreset constructions the turnstile coreset is compared against."""

import logging

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from turnstile_sketch.core.hashing import InstanceTag, SeedSet, bucket_of
from turnstile_sketch.utils.norms import lp_pow

from ..core.exceptions import CoresetValidationError
from ..models.results import Coreset, LossKind, LossName

logger = logging.getLogger(__name__)


def _check_matrix(A: ArrayLike, k: int) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] == 0:
        raise CoresetValidationError(f"baseline needs a non-empty (n, d) matrix, got shape {A.shape}")
    if k < 1:
        raise CoresetValidationError(f"k must be at least 1, got {k}")
    return A


def leverage_distribution(A: ArrayLike, loss: LossKind) -> np.ndarray:
    """Sampling distribution 1/2 mean_q(||u_i||_q^q / ||U||_q^q) + 1/(2n), U = A R^-1.

    q runs over the sampler exponents of the loss; U is the orthonormal
    factor of a QR decomposition of A.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    U, _ = scipy.linalg.qr(A, mode="economic")
    parts = []
    for q in loss.sampler_exponents:
        scores = lp_pow(U, q)
        total = float(scores.sum())
        parts.append(scores / total if total > 0 else np.full(n, 1.0 / n))
    return 0.5 * np.mean(parts, axis=0) + 0.5 / n


def offline_leverage_coreset(A: ArrayLike, loss: LossKind, k: int, seed: int) -> Coreset:
    """Leverage score sampling with the exact matrix in memory.

    Row i is kept independently with probability q_i = min(1, k pi_i), pi
    from leverage_distribution, and weighted 1/q_i.

    Args:
        A: Label-folded data matrix
        loss: Loss the coreset is built for
        k: Expected sample size
        seed: Sampling seed

    Returns:
        Coreset with provenance method=offline-leverage

    Raises:
        CoresetValidationError: If A is empty or k < 1
    """
    A = _check_matrix(A, k)
    probabilities = np.minimum(1.0, k * leverage_distribution(A, loss))
    rng = np.random.default_rng(seed)
    keep = np.flatnonzero(rng.random(A.shape[0]) < probabilities)
    logger.info(f"Offline leverage sample for {loss}: {keep.size} of {A.shape[0]} rows (k={k})")
    return Coreset(
        rows=A[keep],
        weights=1.0 / probabilities[keep],
        loss=loss,
        indices=keep,
        provenance={"method": "offline-leverage", "k": k, "seed": seed, "faithful": True},
    )


def oblivious_stub_coreset(
    A: ArrayLike,
    k: int,
    seed: int,
    loss: LossKind = LossKind(LossName.LOGISTIC),
) -> Coreset:
    """Row-hashing stand-in for an oblivious sketch.

    Rows are hashed into k buckets under the OBLIVIOUS instance tag; each
    non-empty bucket contributes its mean row with weight equal to its size.
    This is not a faithful oblivious sketch for logistic regression and is
    labelled as such in the provenance.
    """
    A = _check_matrix(A, k)
    n = A.shape[0]
    buckets = np.asarray(bucket_of(SeedSet(seed, InstanceTag.OBLIVIOUS), np.arange(n), 0, k))
    counts = np.bincount(buckets, minlength=k)
    sums = np.zeros((k, A.shape[1]))
    np.add.at(sums, buckets, A)
    used = np.flatnonzero(counts)
    logger.info(f"Oblivious stub: {n} rows hashed into {used.size} non-empty buckets")
    return Coreset(
        rows=sums[used] / counts[used, None],
        weights=counts[used].astype(np.float64),
        loss=loss,
        indices=used,
        provenance={"method": "oblivious-stub", "k": k, "seed": seed, "faithful": False},
    )
