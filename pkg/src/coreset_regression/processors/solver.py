"""Minimizing sum_i w_i g(a_i z) on a coreset or on the full data.

lp and relu keep the last coordinate of z fixed to 1, so their free problem
is over t = B z' + c with B the leading columns and c the last column.
Nondifferentiable losses are smoothed, the width annealed from
SolverOptions.smoothing_start to smoothing_end, and polished on the exact loss.
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.optimize
import scipy.sparse
from numpy.typing import ArrayLike, NDArray

from ..core.exceptions import SolverError
from ..models.results import Coreset, LossKind, LossName, SolveResult, SolverOptions
from .losses import loss_grad, loss_value, needs_smoothing, objective, smoothed_value_grad

logger = logging.getLogger(__name__)

ValueGrad = Callable[[NDArray[np.float64]], Tuple[float, NDArray[np.float64]]]


def _split(loss: LossKind, rows: NDArray[np.float64]) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(B, c) with a z = B z' + c."""
    if loss.fixes_last:
        return rows[:, :-1], rows[:, -1].copy()
    return rows, np.zeros(rows.shape[0])


def _full_z(loss: LossKind, free: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.append(free, 1.0) if loss.fixes_last else free


def _exact_value_grad(loss: LossKind, B, c, w) -> ValueGrad:
    def fun(free):
        t = B @ free + c
        return float(np.dot(w, loss_value(loss, t))), B.T @ (w * loss_grad(loss, t))
    return fun


def _smoothed_value_grad(loss: LossKind, B, c, w, width: float) -> ValueGrad:
    def fun(free):
        value, grad = smoothed_value_grad(loss, B @ free + c, width)
        return float(np.dot(w, value)), B.T @ (w * grad)
    return fun


def _bfgs(fun: ValueGrad, start: NDArray[np.float64], options: SolverOptions) -> scipy.optimize.OptimizeResult:
    return scipy.optimize.minimize(
        fun, start, jac=True, method="BFGS",
        options={"maxiter": options.max_iter, "gtol": options.gtol},
    )


def _l1_program(loss: LossKind, B, c, w) -> Optional[NDArray[np.float64]]:
    """Exact minimizer of sum w |B z + c| (lp) or sum w max(0, B z + c) (relu) by linear programming."""
    m, d = B.shape
    basis = scipy.sparse.csr_matrix(B)
    identity = scipy.sparse.identity(m, format="csr")
    if loss.name is LossName.LP:
        A_ub = scipy.sparse.vstack(
            [scipy.sparse.hstack([basis, -identity]), scipy.sparse.hstack([-basis, -identity])],
            format="csr",
        )
        b_ub = np.concatenate([-c, c])
    else:
        A_ub = scipy.sparse.hstack([basis, -identity], format="csr")
        b_ub = -c
    cost = np.concatenate([np.zeros(d), w])
    bounds = [(None, None)] * d + [(0.0, None)] * m
    result = scipy.optimize.linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if result.status != 0:
        logger.warning(f"Polishing linear program failed: {result.message}")
        return None
    return result.x[:d]


def _least_squares(B, c, w) -> NDArray[np.float64]:
    """Minimizer of sum w (B z + c)^2."""
    root = np.sqrt(w)
    solution, *_ = np.linalg.lstsq(B * root[:, None], -c * root, rcond=None)
    return solution


def minimize_loss(
    loss: LossKind,
    rows: ArrayLike,
    weights: Optional[ArrayLike] = None,
    options: Optional[SolverOptions] = None,
    start: Optional[ArrayLike] = None,
) -> SolveResult:
    """Minimize sum_i w_i g(a_i z) over z (last coordinate fixed to 1 for lp and relu).

    Args:
        loss: Loss g
        rows: Matrix A (label-folded)
        weights: Row weights, all ones when omitted
        options: Solver options
        start: Initial z (full length), zeros when omitted

    Returns:
        SolveResult; a run that hit the iteration cap keeps the best iterate
        and has converged=False

    Raises:
        SolverError: If the problem is empty or not finite
    """
    options = options or SolverOptions()
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise SolverError(f"cannot solve on an empty or malformed matrix of shape {rows.shape}")
    if loss.fixes_last and rows.shape[1] < 2:
        raise SolverError(f"{loss} needs at least two columns, the last one fixed")
    if not np.all(np.isfinite(rows)):
        raise SolverError("rows must be finite")
    w = np.ones(rows.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    B, c = _split(loss, rows)
    free = np.zeros(B.shape[1]) if start is None else np.asarray(start, dtype=np.float64)[:B.shape[1]].copy()

    exact = _exact_value_grad(loss, B, c, w)
    best_free, best_value = free, exact(free)[0]
    iterations, converged, message, method = 0, False, "", "bfgs"

    def consider(candidate: NDArray[np.float64]) -> None:
        nonlocal best_free, best_value
        value = exact(candidate)[0]
        if np.isfinite(value) and value <= best_value:
            best_free, best_value = candidate, value

    if needs_smoothing(loss):
        for width in options.smoothing_schedule:
            result = _bfgs(_smoothed_value_grad(loss, B, c, w, width), free, options)
            free = result.x
            iterations += int(result.nit)
            consider(free)
            logger.debug(f"{loss}: smoothing width {width:.0e}, objective {best_value:.8g}")
        method = "smoothed-bfgs"

    if loss.p == 1.0 and loss.name in (LossName.LP, LossName.RELU) and options.polish:
        polished = _l1_program(loss, B, c, w)
        if polished is not None:
            consider(polished)
            converged, message, method = True, "linear program optimal", "linear-program"
    elif loss.name is LossName.LP and loss.p == 2.0 and options.polish:
        consider(_least_squares(B, c, w))
        converged, message, method = True, "least squares", "least-squares"
    elif loss.p == 1.0 and loss.name in (LossName.LP, LossName.RELU):
        # unpolished p = 1 runs end with the smallest smoothing width
        converged = bool(result.success)
        message = str(result.message)
    else:
        # exact loss is differentiable: finish on it directly
        result = _bfgs(exact, best_free, options)
        iterations += int(result.nit)
        consider(result.x)
        converged = bool(result.success) or float(np.linalg.norm(exact(best_free)[1])) <= options.gtol
        message = str(result.message)

    z = _full_z(loss, best_free)
    if not converged:
        logger.warning(f"Solver for {loss} did not converge ({message}); keeping the best iterate")
    logger.info(
        f"Solved {loss} on {rows.shape[0]} rows: objective {best_value:.8g} "
        f"after {iterations} iterations ({method})"
    )
    return SolveResult(
        z=z, objective=float(best_value), converged=converged,
        iterations=iterations, message=message, method=method,
    )


def solve_reduced(coreset: Coreset, options: Optional[SolverOptions] = None) -> SolveResult:
    """Minimize the weighted loss of a coreset.

    Raises:
        SolverError: If the coreset is empty
    """
    if len(coreset) == 0:
        raise SolverError("cannot solve on an empty coreset")
    return minimize_loss(coreset.loss, coreset.rows, coreset.weights, options)


def approximation_ratio(
    loss: LossKind, rows: ArrayLike, z_hat: ArrayLike, optimum: float
) -> float:
    """f(z_hat) / f(z_opt) on the full data, f(z_opt) given as optimum."""
    value = objective(loss, rows, None, z_hat)
    if optimum <= 0.0:
        return 1.0 if value <= 0.0 else float("inf")
    return value / optimum
