"""Compensated lp norm helpers."""

import numpy as np
from numpy.typing import ArrayLike, NDArray


def _abs_pow(x: NDArray[np.float64], p: float) -> NDArray[np.float64]:
    if p == 1.0:
        return np.abs(x)
    if p == 2.0:
        return x * x
    return np.abs(x) ** p


def lp_pow(x: ArrayLike, p: float) -> NDArray[np.float64]:
    """Sum of |x|^p over the last axis with Kahan compensation.

    The summation runs column by column in a fixed order so the result does
    not depend on how the leading axes are batched.

    Args:
        x: Array whose last axis holds the vector entries
        p: Norm exponent

    Returns:
        Array of ||x||_p^p with the last axis removed
    """
    values = np.asarray(x, dtype=np.float64)
    if values.ndim == 0:
        return _abs_pow(values, p)
    powered = _abs_pow(values, p)
    total = np.zeros(values.shape[:-1], dtype=np.float64)
    carry = np.zeros_like(total)
    for column in range(values.shape[-1]):
        y = powered[..., column] - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def lp_norm(x: ArrayLike, p: float) -> NDArray[np.float64]:
    """lp norm over the last axis."""
    return lp_pow(x, p) ** (1.0 / p)


def dual_exponent(p: float) -> float:
    """Hoelder conjugate q with 1/p + 1/q = 1 (infinity for p = 1)."""
    return np.inf if p == 1.0 else p / (p - 1.0)


def lq_norm(x: ArrayLike, q: float) -> NDArray[np.float64]:
    """lq norm over the last axis, q may be infinite."""
    values = np.asarray(x, dtype=np.float64)
    if np.isinf(q):
        return np.max(np.abs(values), axis=-1)
    return lp_pow(values, q) ** (1.0 / q)


def tail_mass(matrix: ArrayLike, p: float, r: int) -> float:
    """Sum of ||a_i||_p^p over all rows except the floor(r/20) largest.

    This is the mass M that heavy hitter guarantees are stated against.
    """
    norms = np.sort(lp_pow(np.asarray(matrix, dtype=np.float64), p))[::-1]
    return float(np.sum(norms[r // 20:]))
