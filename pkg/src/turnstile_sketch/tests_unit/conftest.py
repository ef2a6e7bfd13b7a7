"""Shared fixtures and oracles for turnstile_sketch unit tests."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to Python path for imports
src_path = Path(__file__).parent.parent.parent
if str(src_path) not in sys.path:
    sys.path.insert(0, str(src_path))

from turnstile_sketch.core.hashing import SeedSet, bucket_of, sign_of
from turnstile_sketch.core.settings import get_settings
from turnstile_sketch.models.sketch import SketchConfig


@pytest.fixture
def seeds():
    """Seed set of the stand-alone heavy hitter instance."""
    return SeedSet(master_seed=1234)


@pytest.fixture
def small_config():
    """Small sketch that fits any test machine."""
    return SketchConfig(n=50, d=3, r=16, s=5, p=1.0)


@pytest.fixture
def dyadic_updates():
    """Factory of random updates whose values are multiples of 1/8.

    Sums of such values are exact in double precision, so sketches built in
    different orders or shards agree bit for bit.
    """
    def make(n, d, count, seed=0):
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, n, size=count)
        cols = rng.integers(0, d, size=count)
        values = rng.integers(-64, 65, size=count) / 8.0
        return rows.astype(np.int64), cols.astype(np.int64), values
    return make


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
def bucket_oracle():
    """Exact bucket contents of a CountSketch recomputed from the dense matrix."""
    def buckets(matrix, config, seeds):
        out = np.zeros((config.s, config.r, config.d))
        for j in range(config.s):
            for i in range(matrix.shape[0]):
                out[j, bucket_of(seeds, i, j, config.r)] += sign_of(seeds, i, j) * matrix[i]
        return out
    return buckets


@pytest.fixture
def isolated_settings(monkeypatch, tmp_path):
    """Point TURNSTILE_RUN_DIR at a temporary directory and reload settings."""
    monkeypatch.setenv("TURNSTILE_RUN_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    yield get_settings()
    get_settings.cache_clear()
