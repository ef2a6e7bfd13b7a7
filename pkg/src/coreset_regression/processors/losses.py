"""Loss functions g(t), their derivatives and the objective sum_i w_i g(a_i z).

The four losses are

    lp        |t|^p
    relu      max(0, t)^p
    logistic  ln(1 + e^t)
    probit    -ln Phi_p(-t)

where Phi_p is the CDF of the p-generalized normal distribution with density
proportional to exp(-|t|^p / p). All of them are convex, so the reduced
problem stays convex in z for any fixed weighted data set.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
import scipy.special
from numpy.typing import ArrayLike, NDArray

from turnstile_sketch.utils.norms import lp_norm

from ..core.exceptions import CoresetValidationError
from ..models.results import LossKind, LossName

logger = logging.getLogger(__name__)

# ln Q(a, x) switches to its asymptotic expansion once Q would underflow
_TAIL_SWITCH = 600.0


def phi_p_cdf(p: float, t: ArrayLike) -> NDArray[np.float64]:
    """Phi_p(t) = 1/2 + sign(t) P(1/p, |t|^p / p) / 2, P the regularized lower incomplete gamma.

    Raises:
        CoresetValidationError: If p lies outside [1, 2]
    """
    if not 1.0 <= p <= 2.0:
        raise CoresetValidationError(f"p must lie in [1, 2], got {p}")
    t = np.asarray(t, dtype=np.float64)
    half_mass = 0.5 * scipy.special.gammainc(1.0 / p, np.abs(t) ** p / p)
    return np.where(t >= 0.0, 0.5 + half_mass, 0.5 - half_mass)


def _log_density(p: float, t: NDArray[np.float64]) -> NDArray[np.float64]:
    """ln of the p-generalized normal density exp(-|t|^p / p) / (2 p^(1/p) Gamma(1 + 1/p))."""
    log_norm = math.log(2.0) + math.log(p) / p + scipy.special.gammaln(1.0 + 1.0 / p)
    return -np.abs(t) ** p / p - log_norm


def _log_upper_gamma(a: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """ln Q(a, x) for x >= 0, the regularized upper incomplete gamma function."""
    x = np.asarray(x, dtype=np.float64)
    safe = np.minimum(x, _TAIL_SWITCH)
    with np.errstate(divide="ignore"):
        direct = np.log(scipy.special.gammaincc(a, safe))
    large = np.maximum(x, _TAIL_SWITCH)
    asymptotic = (
        -large + (a - 1.0) * np.log(large) - scipy.special.gammaln(a)
        + np.log1p((a - 1.0) / large + (a - 1.0) * (a - 2.0) / large ** 2)
    )
    return np.where(x < _TAIL_SWITCH, direct, asymptotic)


def _log_phi_neg(p: float, t: NDArray[np.float64]) -> NDArray[np.float64]:
    """ln Phi_p(-t), accurate far into the lower tail."""
    x = np.abs(t) ** p / p
    a = 1.0 / p
    # t > 0: Phi_p(-t) = Q(a, x) / 2; t <= 0: Phi_p(-t) = (1 + P(a, x)) / 2
    upper = math.log(0.5) + _log_upper_gamma(a, np.where(t > 0.0, x, 0.0))
    lower = np.log1p(scipy.special.gammainc(a, np.where(t > 0.0, 0.0, x))) + math.log(0.5)
    return np.where(t > 0.0, upper, lower)


def loss_value(loss: LossKind, t: ArrayLike) -> NDArray[np.float64]:
    """g(t) elementwise."""
    t = np.asarray(t, dtype=np.float64)
    p = loss.p
    if loss.name is LossName.LP:
        return np.abs(t) ** p
    if loss.name is LossName.RELU:
        return np.maximum(t, 0.0) ** p
    if loss.name is LossName.LOGISTIC:
        return np.logaddexp(0.0, t)
    return -_log_phi_neg(p, t)


def loss_grad(loss: LossKind, t: ArrayLike) -> NDArray[np.float64]:
    """g'(t) elementwise; at t = 0 the p = 1 losses return the subgradient 0."""
    t = np.asarray(t, dtype=np.float64)
    p = loss.p
    if loss.name is LossName.LP:
        return p * np.sign(t) * np.abs(t) ** (p - 1.0)
    if loss.name is LossName.RELU:
        if p == 1.0:
            return (t > 0.0).astype(np.float64)
        return p * np.maximum(t, 0.0) ** (p - 1.0)
    if loss.name is LossName.LOGISTIC:
        return scipy.special.expit(t)
    # d/dt -ln Phi_p(-t) = phi_p(t) / Phi_p(-t), the density being symmetric
    return np.exp(_log_density(p, t) - _log_phi_neg(p, t))


def smoothed_value_grad(
    loss: LossKind, t: NDArray[np.float64], width: float
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Smooth surrogate of the lp and relu losses and its derivative.

    lp:   (t^2 + w^2)^(p/2) - w^p
    relu: ((t + sqrt(t^2 + w^2)) / 2)^p
    Both tend to g uniformly as the width w goes to 0.
    """
    p = loss.p
    root = np.sqrt(t * t + width * width)
    if loss.name is LossName.LP:
        value = root ** p - width ** p
        grad = p * t * root ** (p - 2.0)
        return value, grad
    if loss.name is LossName.RELU:
        # (t + root) / 2 rewritten for t < 0 to avoid cancellation
        soft = np.where(
            t >= 0.0, 0.5 * (t + root), 0.5 * width * width / (root - np.minimum(t, 0.0))
        )
        value = soft ** p
        grad = p * value / root
        return value, grad
    raise CoresetValidationError(f"{loss} needs no smoothing")


def needs_smoothing(loss: LossKind) -> bool:
    """lp and relu below p = 2 are not twice differentiable at the kink."""
    return loss.name in (LossName.LP, LossName.RELU) and loss.p < 2.0


def objective(
    loss: LossKind, rows: ArrayLike, weights: Optional[ArrayLike], z: ArrayLike
) -> float:
    """sum_i w_i g(a_i z), unit weights when weights is None."""
    t = np.asarray(rows, dtype=np.float64) @ np.asarray(z, dtype=np.float64)
    values = loss_value(loss, t)
    if weights is None:
        return float(np.sum(values))
    return float(np.dot(np.asarray(weights, dtype=np.float64), values))


def objective_grad(
    loss: LossKind, rows: ArrayLike, weights: Optional[ArrayLike], z: ArrayLike
) -> NDArray[np.float64]:
    """Gradient of objective() with respect to z."""
    rows = np.asarray(rows, dtype=np.float64)
    grads = loss_grad(loss, rows @ np.asarray(z, dtype=np.float64))
    if weights is not None:
        grads = grads * np.asarray(weights, dtype=np.float64)
    return rows.T @ grads


def perturbation_sensitivity(
    loss: LossKind,
    rows: ArrayLike,
    eps: float,
    seed: int = 0,
    n_directions: int = 200,
) -> float:
    """Measured constant C with |f(A~ z) - f(A z)| <= C eps f(A z).

    Every row is moved by a random vector of lp length (eps / 3) ||a_i||_p,
    the relative change of the objective is maximized over random z and
    divided by eps.

    Raises:
        CoresetValidationError: If eps is not positive
    """
    if eps <= 0:
        raise CoresetValidationError(f"eps must be positive, got {eps}")
    rows = np.asarray(rows, dtype=np.float64)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(rows.shape)
    noise_norms = lp_norm(noise, loss.p)
    noise_norms[noise_norms == 0] = 1.0
    shift = noise / noise_norms[:, None] * (eps / 3.0 * lp_norm(rows, loss.p))[:, None]
    perturbed = rows + shift

    worst = 0.0
    for z in rng.standard_normal((n_directions, rows.shape[1])):
        base = objective(loss, rows, None, z)
        if base <= 0:
            continue
        worst = max(worst, abs(objective(loss, perturbed, None, z) - base) / base)
    constant = worst / eps
    logger.info(f"Perturbation sensitivity of {loss} at eps={eps}: C={constant:.4g}")
    return constant
