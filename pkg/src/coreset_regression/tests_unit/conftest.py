"""Shared fixtures for coreset_regression unit tests."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to Python path for imports
src_path = Path(__file__).parent.parent.parent
if str(src_path) not in sys.path:
    sys.path.insert(0, str(src_path))

from turnstile_sketch.core.settings import get_settings
from turnstile_sketch.processors.synthetic import fold_labels


@pytest.fixture
def regression_data():
    """Factory of label-folded lp regression matrices [X, -y] with Laplace noise."""
    def make(n, d, seed=0, noise=0.5):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, d - 1))
        beta = rng.standard_normal(d - 1)
        y = X @ beta + noise * rng.laplace(size=n)
        return fold_labels(X, y, "lp"), X, y
    return make


@pytest.fixture
def classification_data():
    """Factory of label-folded classification matrices with overlapping classes."""
    def make(n, d, seed=0, fold="logistic"):
        rng = np.random.default_rng(seed)
        features = d - 1 if fold == "relu" else d
        X = rng.standard_normal((n, features))
        beta = rng.standard_normal(features)
        y = np.where(rng.random(n) < 1.0 / (1.0 + np.exp(-(X @ beta))), 1.0, -1.0)
        return fold_labels(X, y, fold), X, y
    return make


@pytest.fixture
def isolated_settings(monkeypatch, tmp_path):
    """Point TURNSTILE_RUN_DIR at a temporary directory and reload settings."""
    monkeypatch.setenv("TURNSTILE_RUN_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    yield get_settings()
    get_settings.cache_clear()
