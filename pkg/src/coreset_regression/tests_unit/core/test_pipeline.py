"""Unit tests for the streaming coreset pipeline."""

import logging

import numpy as np
import pytest

from coreset_regression.core import pipeline as pipeline_module
from coreset_regression.core.exceptions import CoresetError
from coreset_regression.core.pipeline import CoresetPipeline, build_coreset, matrix_batches
from coreset_regression.models.results import CoresetConfig, LossKind
from turnstile_sketch.core.exceptions import SketchValidationError
from turnstile_sketch.models.sample import WeightedSample
from turnstile_sketch.models.stream import StreamHeader
from turnstile_sketch.processors.lp_sampler import LpSampler, UniformSampler
from turnstile_sketch.utils.stream_io import write_stream_arrays


def _write_matrix(path, A):
    rows, cols = np.nonzero(A)
    return write_stream_arrays(path, StreamHeader(*A.shape), rows, cols, A[rows, cols])


class TestMatrixBatches:
    """Test dense matrices as update batches."""

    def test_nonzero_entries_in_row_major_order(self):
        """Test every nonzero entry appears once, zeros are skipped."""
        A = np.array([[1.0, 0.0, 2.0], [0.0, 0.0, -3.0]])
        batches = list(matrix_batches(A, batch_size=2))
        assert [b[0].size for b in batches] == [2, 1]
        rows = np.concatenate([b[0] for b in batches])
        cols = np.concatenate([b[1] for b in batches])
        values = np.concatenate([b[2] for b in batches])
        np.testing.assert_array_equal(rows, [0, 0, 1])
        np.testing.assert_array_equal(cols, [0, 2, 2])
        np.testing.assert_array_equal(values, [1.0, 2.0, -3.0])


class TestSingleRow:
    """Test a one-row stream."""

    def test_row_is_kept_exactly_with_weight_one(self, caplog):
        """Test k = 1 on [[1, -2, 0.5]] returns the row itself with weight 1."""
        A = np.array([[1.0, -2.0, 0.5]])
        config = CoresetConfig(loss=LossKind("lp", 1.0), k=1)
        with caplog.at_level(logging.WARNING, logger="coreset_regression.core.pipeline"):
            coreset = CoresetPipeline(config, max_workers=2).build_from_matrix(A)
        assert len(coreset) == 1
        np.testing.assert_array_equal(coreset.rows, A)
        np.testing.assert_array_equal(coreset.weights, [1.0])
        np.testing.assert_array_equal(coreset.indices, [0])
        assert any("sampling without conditioning" in r.message for r in caplog.records)
        assert coreset.provenance["components"][0]["conditioned"] is False


class TestCoresetPipeline:
    """Test coresets of moderate streams."""

    @pytest.fixture
    def gaussian(self, regression_data):
        """2000 x 3 label-folded regression matrix."""
        A, _, _ = regression_data(2000, 3, seed=21)
        return A

    def test_size_weights_and_provenance(self, gaussian):
        """Test an lp coreset holds rows of A with weights >= 1."""
        config = CoresetConfig(loss=LossKind("lp", 1.0), k=50, seed=3)
        pipeline = CoresetPipeline(config)
        coreset = pipeline.build_from_matrix(gaussian)

        assert 50 <= len(coreset) <= 300
        assert np.all(coreset.weights >= 1.0)
        assert np.all(np.diff(coreset.indices) > 0)
        assert coreset.rows.shape == (len(coreset), 3)
        assert np.all(np.isfinite(coreset.rows))

        provenance = coreset.provenance
        assert provenance["method"] == "turnstile"
        assert (provenance["n"], provenance["d"]) == (2000, 3)
        assert provenance["updates"] == np.count_nonzero(gaussian)
        assert provenance["uniform_rate"] == pytest.approx(50 / 2000)
        assert provenance["alpha"] > 0
        [component] = provenance["components"]
        assert component["name"] == "p-sampler(p=1)"
        assert component["conditioned"] is True
        assert component["qr_residual"] < 1e-12
        for key in ("ingest_seconds", "condition_seconds", "sample_seconds", "total_seconds"):
            assert pipeline.timings[key] >= 0.0
        assert provenance["timings"] == pipeline.timings

    def test_probit_runs_two_samplers(self, classification_data):
        """Test probit with p = 1.5 combines a p sampler and an l1 sampler."""
        A, _, _ = classification_data(2000, 3, seed=5, fold="probit")
        coreset = CoresetPipeline(CoresetConfig(loss=LossKind("probit", 1.5), k=40)).build_from_matrix(A)
        names = [c["name"] for c in coreset.provenance["components"]]
        assert names == ["p-sampler(p=1.5)", "one-sampler(p=1)"]
        assert coreset.provenance["method"] == "turnstile"

    def test_mixture_exponent(self, gaussian):
        """Test an extra exponent adds a mixture component."""
        config = CoresetConfig(loss=LossKind("lp", 1.0), k=40, extra_exponents=(2.0,))
        coreset = CoresetPipeline(config).build_from_matrix(gaussian)
        assert coreset.provenance["method"] == "turnstile-mixture"
        assert [c["p"] for c in coreset.provenance["components"]] == [1.0, 2.0]

    def test_plain_configuration(self, gaussian):
        """Test no uniform component and no conditioner."""
        config = CoresetConfig(loss=LossKind("lp", 2.0), k=40, uniform_mix=False, conditioned=False)
        coreset = CoresetPipeline(config).build_from_matrix(gaussian)
        assert coreset.provenance["uniform_rate"] is None
        assert coreset.provenance["components"][0]["conditioned"] is False
        assert coreset.provenance["components"][0]["qr_residual"] is None

    def test_deterministic_for_fixed_seed(self, gaussian):
        """Test equal seeds give equal coresets regardless of worker count."""
        config = CoresetConfig(loss=LossKind("lp", 1.0), k=30, seed=7)
        first = CoresetPipeline(config, max_workers=1).build_from_matrix(gaussian)
        second = CoresetPipeline(config, max_workers=4).build_from_matrix(gaussian)
        np.testing.assert_array_equal(first.indices, second.indices)
        np.testing.assert_array_equal(first.weights, second.weights)

    def test_measure_conditioning(self, gaussian):
        """Test alpha_hat and beta_hat are recorded on request."""
        config = CoresetConfig(loss=LossKind("lp", 2.0), k=40, measure_conditioning=True)
        coreset = CoresetPipeline(config).build_from_matrix(gaussian)
        measured = coreset.provenance["conditioning"]
        assert measured["alpha_hat"] > 0
        assert measured["beta_hat"] > 0
        assert measured["beta_exact"] is True

    def test_stream_matches_matrix(self, gaussian, tmp_path):
        """Test a stream file gives the coreset of its matrix."""
        config = CoresetConfig(loss=LossKind("lp", 1.0), k=30, seed=2)
        stream = _write_matrix(tmp_path / "a.txt", gaussian)
        from_stream = build_coreset(stream, config)
        from_matrix = build_coreset(gaussian, config)
        np.testing.assert_array_equal(from_stream.indices, from_matrix.indices)
        np.testing.assert_allclose(from_stream.weights, from_matrix.weights, rtol=1e-12)

    def test_rejects_non_matrix(self):
        """Test in-memory input must be two-dimensional."""
        pipeline = CoresetPipeline(CoresetConfig(loss=LossKind("logistic"), k=5))
        with pytest.raises(CoresetError, match="matrix"):
            pipeline.build_from_matrix(np.ones(4))

    def test_consumer_failure_is_wrapped(self, mocker):
        """Test an unexpected consumer error surfaces as CoresetError."""
        mocker.patch.object(UniformSampler, "ingest", side_effect=RuntimeError("disk full"))
        pipeline = CoresetPipeline(CoresetConfig(loss=LossKind("lp", 1.0), k=5))
        with pytest.raises(CoresetError, match="uniform failed to ingest a batch: disk full"):
            pipeline.build_from_matrix(np.ones((10, 2)))

    def test_sketch_errors_pass_through(self, mocker):
        """Test sketch errors keep their own type."""
        mocker.patch.object(LpSampler, "ingest", side_effect=SketchValidationError("bad batch"))
        pipeline = CoresetPipeline(CoresetConfig(loss=LossKind("lp", 1.0), k=5))
        with pytest.raises(SketchValidationError, match="bad batch"):
            pipeline.build_from_matrix(np.ones((10, 2)))


class TestUniformUnion:
    """Test how the uniform component joins the lp sample."""

    def test_duplicates_keep_lp_rows(self, regression_data, mocker):
        """Test an index drawn by both samplers keeps the lp sampler's row."""
        A, _, _ = regression_data(400, 3, seed=5)
        n = A.shape[0]

        def every_row_marked(self):
            return WeightedSample(
                indices=np.arange(n),
                rows=np.full((n, 3), 7.0),
                weights=np.ones(n),
                prob_estimates=np.ones(n),
                alpha=1.0,
                p=1.0,
                metadata={"component": "uniform", "rate": 1.0},
            )

        mocker.patch.object(UniformSampler, "sample", every_row_marked)
        spy = mocker.spy(pipeline_module, "union_mixture")
        config = CoresetConfig(loss=LossKind("lp", 1.0), k=20, seed=9)
        coreset = CoresetPipeline(config).build_from_matrix(A)

        lp_sample, uniform_sample = spy.call_args.args[:2]
        assert uniform_sample.metadata["component"] == "uniform"
        assert len(lp_sample) > 0
        np.testing.assert_array_equal(coreset.indices, np.arange(n))

        drawn = np.isin(coreset.indices, lp_sample.indices)
        np.testing.assert_array_equal(coreset.rows[drawn], lp_sample.rows)
        assert not np.any(coreset.rows[drawn] == 7.0)
        assert np.all(coreset.rows[~drawn] == 7.0)
