"""Integration test configuration and oracles.

The oracles here share no code with the solver: scikit-learn for logistic
regression, a dense scipy linear program for l1 regression and scipy's
log_ndtr for the p = 2 probit loss.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.optimize
import scipy.special

# Add src directory to Python path for imports
src_path = Path(__file__).parent.parent.parent
if str(src_path) not in sys.path:
    sys.path.insert(0, str(src_path))

from turnstile_sketch.processors.synthetic import SyntheticConfig, gen_synthetic


def _sklearn_logistic(X, y):
    """Unpenalized logistic regression without intercept, labels in {-1, +1}."""
    from sklearn.linear_model import LogisticRegression

    model = LogisticRegression(penalty=None, fit_intercept=False, tol=1e-12, max_iter=10000)
    model.fit(X, y)
    return model.coef_.ravel()


def _l1_regression(X, y):
    """argmin_beta sum |X beta - y| as a dense linear program."""
    n, d = X.shape
    A_ub = np.block([[X, -np.eye(n)], [-X, -np.eye(n)]])
    b_ub = np.concatenate([y, -y])
    cost = np.concatenate([np.zeros(d), np.ones(n)])
    bounds = [(None, None)] * d + [(0.0, None)] * n
    result = scipy.optimize.linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    assert result.status == 0, result.message
    return result.x[:d], float(result.fun)


def _probit_regression(X, y):
    """argmin_beta -sum log Phi(y x beta) by quasi-Newton steps on log_ndtr."""
    def fun(beta):
        margin = y * (X @ beta)
        # phi(m) / Phi(m) in log space
        ratio = np.exp(-0.5 * margin ** 2 - 0.5 * np.log(2.0 * np.pi) - scipy.special.log_ndtr(margin))
        return -np.sum(scipy.special.log_ndtr(margin)), -X.T @ (y * ratio)
    result = scipy.optimize.minimize(fun, np.zeros(X.shape[1]), jac=True, method="L-BFGS-B",
                                     options={"gtol": 1e-10, "ftol": 1e-15, "maxiter": 10000})
    return result.x, float(result.fun)


@pytest.fixture
def sklearn_logistic():
    """Logistic regression oracle."""
    return _sklearn_logistic


@pytest.fixture
def l1_regression_oracle():
    """Least absolute deviations oracle."""
    return _l1_regression


@pytest.fixture
def probit_oracle():
    """p = 2 probit regression oracle."""
    return _probit_regression


@pytest.fixture
def synthetic_matrix():
    """Label-folded synthetic data as generated for the experiments."""
    def make(kind, n, d, seed, fold="logistic"):
        return gen_synthetic(SyntheticConfig(kind=kind, n=n, d=d, seed=seed, fold=fold)).matrix
    return make
