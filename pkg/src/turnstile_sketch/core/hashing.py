"""Counter-based hashing for all per-row sketch randomness.

Every random quantity (bucket ``h(i, j)``, sign ``sigma(i, j)``, scale ``t_i``
and the p-stable embedding entries) is a pure function of
``(master_seed, instance_tag, domain, i, j)``. Nothing is stored, so updates
can arrive in any order and shards hashed on different workers agree.

Instance tags in use:

    ==  ===================  ==========================================
    0   HEAVY_HITTER         stand-alone heavy hitter sketch (CLI)
    1   P_SAMPLER_ALPHA      p-sampler, copy used to pick alpha
    2   P_SAMPLER_DRAW       p-sampler, copy the sample is drawn from
    3   ONE_SAMPLER_ALPHA    1-sampler (logistic, probit), alpha copy
    4   ONE_SAMPLER_DRAW     1-sampler, draw copy
    5   MIXTURE_ALPHA        extra mixture exponent q, alpha copy
    6   MIXTURE_DRAW         extra mixture exponent q, draw copy
    7   UNIFORM              uniform component membership
    8   P_EMBEDDING          subspace embedding for exponent p
    9   ONE_EMBEDDING        subspace embedding for exponent 1
    10  MIXTURE_EMBEDDING    subspace embedding for exponent q
    11  OBLIVIOUS            row hashing of the oblivious baseline
    ==  ===================  ==========================================
"""

from dataclasses import dataclass, replace
from enum import IntEnum
from functools import lru_cache
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import SketchValidationError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MUL1 = np.uint64(_MUL1)
_U_MUL2 = np.uint64(_MUL2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U12 = np.uint64(12)
_U63 = np.uint64(63)

# t = ((h >> 12) + 1/2) / 2^52 keeps both endpoints out exactly
_UNIT_SCALE = float(2 ** 52)

IntOrArray = Union[int, NDArray[np.int64]]
FloatOrArray = Union[float, NDArray[np.float64]]


class InstanceTag(IntEnum):
    """Hash domains of independent sketch instances."""
    HEAVY_HITTER = 0
    P_SAMPLER_ALPHA = 1
    P_SAMPLER_DRAW = 2
    ONE_SAMPLER_ALPHA = 3
    ONE_SAMPLER_DRAW = 4
    MIXTURE_ALPHA = 5
    MIXTURE_DRAW = 6
    UNIFORM = 7
    P_EMBEDDING = 8
    ONE_EMBEDDING = 9
    MIXTURE_EMBEDDING = 10
    OBLIVIOUS = 11


class HashDomain(IntEnum):
    """Which random quantity a hash feeds."""
    BUCKET = 1
    SIGN = 2
    SCALE = 3
    STABLE_ANGLE = 4
    STABLE_EXPONENTIAL = 5


@dataclass(frozen=True)
class SeedSet:
    """Master seed plus the tag of one independent sketch instance."""
    master_seed: int
    instance_tag: int = int(InstanceTag.HEAVY_HITTER)

    def __post_init__(self):
        """Validate seeds after initialization."""
        if not 0 <= self.master_seed <= _MASK64:
            raise SketchValidationError(
                f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}"
            )
        if self.instance_tag < 0:
            raise SketchValidationError(
                f"instance_tag must be non-negative, got {self.instance_tag}"
            )

    def with_tag(self, tag: int) -> "SeedSet":
        """Same master seed, different instance."""
        return replace(self, instance_tag=int(tag))


def _mix_int(x: int) -> int:
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK64
    return z ^ (z >> 31)


def _mix(x: NDArray[np.uint64]) -> NDArray[np.uint64]:
    z = x + _U_GOLDEN
    z = (z ^ (z >> _U30)) * _U_MUL1
    z = (z ^ (z >> _U27)) * _U_MUL2
    return z ^ (z >> _U31)


@lru_cache(maxsize=1024)
def _instance_key(master_seed: int, instance_tag: int, domain: int) -> int:
    return _mix_int(_mix_int(_mix_int(master_seed) ^ instance_tag) ^ domain)


def hash64(
    seeds: SeedSet, domain: int, i: ArrayLike, j: ArrayLike = 0
) -> NDArray[np.uint64]:
    """Keyed 64-bit hash of (seeds, domain, i, j), broadcast over i and j.

    Args:
        seeds: Seed set of the sketch instance
        domain: HashDomain value
        i: Row index or array of row indices (non-negative)
        j: Repetition or embedding-row index, broadcast against i

    Returns:
        uint64 array with the broadcast shape of i and j (at least 1-d)
    """
    key = np.uint64(_instance_key(seeds.master_seed, seeds.instance_tag, int(domain)))
    i_arr = np.atleast_1d(np.asarray(i, dtype=np.int64)).astype(np.uint64)
    j_arr = np.atleast_1d(np.asarray(j, dtype=np.int64)).astype(np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(i_arr ^ key)
        return _mix(h ^ (j_arr * _U_GOLDEN))


def _is_scalar(*values: ArrayLike) -> bool:
    return all(np.ndim(v) == 0 for v in values)


def bucket_of(seeds: SeedSet, i: ArrayLike, j: ArrayLike, r: int) -> IntOrArray:
    """Bucket h(i, j) in [0, r) of row i in repetition j.

    Args:
        seeds: Seed set of the sketch instance
        i: Row index or array of indices
        j: Repetition index or array, broadcast against i
        r: Number of buckets per repetition

    Returns:
        int for scalar inputs, otherwise an int64 array
    """
    if r < 1:
        raise SketchValidationError(f"bucket count r must be at least 1, got {r}")
    buckets = (hash64(seeds, HashDomain.BUCKET, i, j) % np.uint64(r)).astype(np.int64)
    return int(buckets[0]) if _is_scalar(i, j) else buckets


def sign_of(seeds: SeedSet, i: ArrayLike, j: ArrayLike) -> Union[int, NDArray[np.float64]]:
    """Sign sigma(i, j) in {-1, +1}; arrays come back as float64 for arithmetic."""
    top = (hash64(seeds, HashDomain.SIGN, i, j) >> _U63).astype(np.float64)
    signs = 1.0 - 2.0 * top
    return int(signs[0]) if _is_scalar(i, j) else signs


def uniform_of(
    seeds: SeedSet, domain: int, i: ArrayLike, j: ArrayLike = 0
) -> FloatOrArray:
    """Uniform value in the open interval (0, 1) for (domain, i, j)."""
    top = (hash64(seeds, domain, i, j) >> _U12).astype(np.float64)
    values = (top + 0.5) / _UNIT_SCALE
    return float(values[0]) if _is_scalar(i, j) else values


def scale_of(seeds: SeedSet, i: ArrayLike) -> FloatOrArray:
    """Scaling factor t_i in (0, 1), never exactly 0 or 1."""
    return uniform_of(seeds, HashDomain.SCALE, i, 0)
