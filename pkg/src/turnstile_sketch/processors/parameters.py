"""Sketch size presets.

``theory`` instantiates the worst-case constants of the recovery and
sampling guarantees; they are far beyond desk scale for small eps and mostly
serve to document the asymptotics. ``practical`` uses the fixed experimental
choice r = ceil(k * max(30, ln n)), s = 2 * ceil(max(5, ln(n) / 2)) with
the heavy test threshold lowered to M0 itself.
"""

import logging
import math
from enum import Enum

from ..core.exceptions import SketchValidationError
from ..models.sketch import MAX_EPS, SketchConfig

logger = logging.getLogger(__name__)

PERCENTILE_SLACK = 0.025
PRACTICAL_THRESHOLD_FACTOR = 1.0
DEFAULT_EMBEDDING_FACTOR = 10.0


class ParameterMode(str, Enum):
    """Which constants size the sketch."""
    THEORY = "theory"
    PRACTICAL = "practical"


def practical_r(n: int, k: int) -> int:
    """Buckets per repetition, ceil(k * max(30, ln n))."""
    return int(math.ceil(k * max(30.0, math.log(n))))


def practical_s(n: int) -> int:
    """Repetitions, 2 * ceil(max(5, ln(n) / 2))."""
    return 2 * int(math.ceil(max(5.0, math.log(n) / 2.0)))


def practical_config(n: int, d: int, k: int, p: float, eps: float = MAX_EPS) -> SketchConfig:
    """Sketch used by the experiments."""
    return SketchConfig(
        n=n, d=d, r=practical_r(n, k), s=practical_s(n), p=p, eps=eps,
        threshold_factor=PRACTICAL_THRESHOLD_FACTOR,
    )


def theory_repetitions(n: int, delta: float, union_factor: float) -> int:
    """s = ceil(3 ln(union_factor * n / delta) / 0.025^3)."""
    return int(math.ceil(3.0 * math.log(union_factor * n / delta) / PERCENTILE_SLACK ** 3))


def theory_heavy_hitter_config(
    n: int, d: int, p: float, eps: float, gamma: float, delta: float
) -> SketchConfig:
    """Recovery guarantee for rows with ||a_i||_p^p >= gamma M.

    r = 8 / gamma * (12 / eps)^p and s = 3 ln(6 n / delta) / 0.025^3.
    """
    if not 0.0 < gamma <= 1.0:
        raise SketchValidationError(f"gamma must lie in (0, 1], got {gamma}")
    r = int(math.ceil(8.0 / gamma * (12.0 / eps) ** p))
    return SketchConfig(n=n, d=d, r=r, s=theory_repetitions(n, delta, 6.0), p=p, eps=eps)


def theory_sampler_config(
    n: int, d: int, k: int, p: float, eps: float, delta: float
) -> SketchConfig:
    """Sampling guarantee: r = 32 k ln(n) (72 / eps)^p, s = 3 ln(36 n / delta) / 0.025^3."""
    r = int(math.ceil(32.0 * k * max(1.0, math.log(n)) * (72.0 / eps) ** p))
    return SketchConfig(n=n, d=d, r=r, s=theory_repetitions(n, delta, 36.0), p=p, eps=eps)


def conditioning_order(d: int, p: float) -> float:
    """Order of (alpha beta)^p for the embedding conditioner.

    4d for p = 2, otherwise d^(3 - p/2) (ln d)^(2 - p/2) ln ln d with both
    logarithms clipped below at 1.
    """
    if p == 2.0:
        return 4.0 * d
    log_d = max(1.0, math.log(d))
    log_log_d = max(1.0, math.log(log_d))
    return d ** (3.0 - p / 2.0) * log_d ** (2.0 - p / 2.0) * log_log_d


def coreset_r(loss: str, n: int, d: int, k: int, p: float, eps: float, mu: float) -> int:
    """Buckets per repetition for an eps-coreset of the given loss.

    Args:
        loss: One of lp, relu, logistic, probit
        n: Row universe
        d: Column dimension
        k: Sample size
        p: Loss exponent (logistic uses 1)
        eps: Coreset accuracy
        mu: Complexity bound of the data (>= 1)
    """
    if mu < 1.0:
        raise SketchValidationError(f"mu must be at least 1, got {mu}")
    base = k * max(1.0, math.log(n))
    ab = conditioning_order(d, p)
    if loss == "lp":
        overhead = (ab / eps) ** p
    elif loss == "relu":
        overhead = (mu * ab / eps) ** p
    elif loss == "logistic":
        overhead = mu * conditioning_order(d, 1.0) / eps
    elif loss == "probit":
        overhead = (p * mu * mu * ab / eps) ** p
    else:
        raise SketchValidationError(f"unknown loss {loss!r}")
    return int(math.ceil(base * overhead))


def coreset_config(
    mode: ParameterMode,
    loss: str,
    n: int,
    d: int,
    k: int,
    p: float,
    eps: float = MAX_EPS,
    delta: float = 0.05,
    mu: float = 1.0,
) -> SketchConfig:
    """Sketch for one sampler of a coreset construction.

    In theory mode s = ceil(3 ln(36 n / delta)).
    """
    mode = ParameterMode(mode)
    if mode is ParameterMode.PRACTICAL:
        config = practical_config(n, d, k, p, eps)
    else:
        config = SketchConfig(
            n=n, d=d, r=coreset_r(loss, n, d, k, p, eps, mu),
            s=int(math.ceil(3.0 * math.log(36.0 * n / delta))), p=p, eps=eps,
        )
    logger.info(f"{mode.value} sketch for {loss} (p={p}): r={config.r}, s={config.s}")
    return config


def sampler_config(
    mode: ParameterMode, n: int, d: int, k: int, p: float,
    eps: float = MAX_EPS, delta: float = 0.05,
) -> SketchConfig:
    """Sketch for a stand-alone sampler."""
    if ParameterMode(mode) is ParameterMode.PRACTICAL:
        return practical_config(n, d, k, p, eps)
    return theory_sampler_config(n, d, k, p, eps, delta)


def embedding_rows(d: int, p: float, factor: float = DEFAULT_EMBEDDING_FACTOR) -> int:
    """Rows of the subspace embedding: factor * d^2 for p = 2, factor * d ln d below."""
    if p == 2.0:
        return int(math.ceil(factor * d * d))
    return max(int(math.ceil(factor * d * max(1.0, math.log(d)))), 2 * d)
