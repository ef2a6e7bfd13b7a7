"""Integration tests for conditioners built from streamed subspace embeddings."""

import numpy as np
import pytest

from turnstile_sketch.core.hashing import InstanceTag, SeedSet
from turnstile_sketch.processors.conditioning import (
    EmbeddingSketch,
    finalize_conditioner,
    leverage_bounds,
    measure_conditioning,
)


def _instance(seed, n, d):
    """Gaussian matrix with column scales spread over four orders of magnitude."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-2.0, 2.0, size=d)


def _conditioner(A, p, seed):
    tag = InstanceTag.ONE_EMBEDDING if p == 1.0 else InstanceTag.P_EMBEDDING
    sketch = EmbeddingSketch.from_matrix(A, p, SeedSet(seed, tag))
    return sketch, finalize_conditioner(sketch)


class TestConditioningAcceptance:
    """Test QR accuracy and leverage score bounds."""

    @pytest.mark.integration
    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_qr_residual(self, p):
        """Test ||Pi A - Q R|| / ||Pi A|| <= 1e-9 on 20 instances."""
        for instance in range(20):
            _, cond = _conditioner(_instance(instance, 500, 5), p, instance)
            assert cond.qr_residual <= 1e-9
            assert np.all(np.diag(cond.R) > 0)

    @pytest.mark.integration
    def test_l2_bounds_dominate_exact_leverage(self, l2_leverage_oracle):
        """Test beta^2 ||a_i R^-1||_2^2 >= exact leverage for every row."""
        for instance in range(20):
            A = _instance(100 + instance, 500, 5)
            _, cond = _conditioner(A, 2.0, instance)
            alpha, beta, exact = measure_conditioning(cond, A)
            assert exact
            bounds = leverage_bounds(cond, A, beta)
            leverage = l2_leverage_oracle(A)
            assert np.all(bounds >= leverage * (1.0 - 1e-9))
            assert leverage.sum() <= (alpha * beta) ** 2 * (1.0 + 1e-9)

    @pytest.mark.integration
    def test_l1_bounds_dominate_exact_leverage(self, l1_leverage_oracle):
        """Test beta ||a_i R^-1||_1 >= exact l1 leverage on 25 x 4 instances."""
        for instance in range(20):
            A = _instance(200 + instance, 25, 4)
            _, cond = _conditioner(A, 1.0, instance)
            alpha, beta, exact = measure_conditioning(cond, A)
            assert exact
            bounds = leverage_bounds(cond, A, beta)
            leverage = l1_leverage_oracle(A)
            assert np.all(bounds >= leverage * (1.0 - 1e-5))
            assert leverage.sum() <= alpha * beta * (1.0 + 1e-5)

    @pytest.mark.integration
    def test_l2_embedding_distortion(self):
        """Test ||Pi A x|| / ||A x|| stays within a factor 4 over random directions."""
        A = _instance(7, 500, 5)
        sketch, _ = _conditioner(A, 2.0, 7)
        directions = np.random.default_rng(8).standard_normal((5, 100))
        ratios = np.linalg.norm(sketch.matrix @ directions, axis=0) / np.linalg.norm(A @ directions, axis=0)
        assert ratios.max() / ratios.min() <= 4.0

    @pytest.mark.integration
    def test_streamed_and_dense_embeddings_agree(self):
        """Test an entry split into many updates embeds like the dense matrix."""
        A = _instance(9, 200, 3)
        seeds = SeedSet(4, InstanceTag.P_EMBEDDING)
        dense = EmbeddingSketch.from_matrix(A, 1.5, seeds)
        rows, cols = np.nonzero(A)
        halves = A[rows, cols] / 2.0
        streamed = EmbeddingSketch(200, 3, 1.5, seeds)
        streamed.ingest(rows, cols, halves).ingest(rows[::-1], cols[::-1], halves[::-1])
        np.testing.assert_allclose(streamed.matrix, dense.matrix, rtol=1e-9, atol=1e-9 * np.abs(dense.matrix).max())
