"""Integration test configuration and oracles.

The oracles here are written independently of the package code: plain loops,
SVD and scipy linear programs.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.optimize

# Add src directory to Python path for imports
src_path = Path(__file__).parent.parent.parent
if str(src_path) not in sys.path:
    sys.path.insert(0, str(src_path))


def _exact_l2_leverage(A):
    """Leverage scores ||e_i^T U||_2^2 from the thin SVD of A."""
    U, singular, _ = np.linalg.svd(np.asarray(A, dtype=np.float64), full_matrices=False)
    U = U[:, singular > singular.max() * 1e-12]
    return np.sum(U * U, axis=1)


def _exact_l1_leverage(A):
    """sup_z |a_i z| / ||A z||_1, i.e. 1 / min{||A z||_1 : a_i z = 1}, one LP per row."""
    A = np.asarray(A, dtype=np.float64)
    n, d = A.shape
    # variables (z, t) with -t <= A z <= t, minimize sum t
    A_ub = np.block([[A, -np.eye(n)], [-A, -np.eye(n)]])
    b_ub = np.zeros(2 * n)
    cost = np.concatenate([np.zeros(d), np.ones(n)])
    bounds = [(None, None)] * d + [(0.0, None)] * n
    scores = np.zeros(n)
    for i in range(n):
        if not np.any(A[i]):
            continue
        A_eq = np.concatenate([A[i], np.zeros(n)])[None, :]
        result = scipy.optimize.linprog(
            cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs"
        )
        assert result.status == 0, result.message
        scores[i] = 1.0 / result.fun
    return scores


@pytest.fixture
def dense_oracle():
    """Accumulate updates into a dense matrix with plain Python loops."""
    def replay(n, d, rows, cols, values):
        matrix = np.zeros((n, d))
        for i, j, v in zip(rows, cols, values):
            matrix[int(i), int(j)] += float(v)
        return matrix
    return replay


@pytest.fixture
def dyadic_stream():
    """Factory of random streams with values on a 1/8 grid, exact under any summation order."""
    def make(n, d, count, seed):
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, n, size=count).astype(np.int64)
        cols = rng.integers(0, d, size=count).astype(np.int64)
        values = rng.integers(-64, 65, size=count) / 8.0
        return rows, cols, values
    return make


@pytest.fixture
def l2_leverage_oracle():
    """Exact l2 leverage scores."""
    return _exact_l2_leverage


@pytest.fixture
def l1_leverage_oracle():
    """Exact l1 leverage scores."""
    return _exact_l1_leverage
