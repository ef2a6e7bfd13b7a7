"""Integration tests for sketch linearity, sharding and merging."""

import numpy as np
import pytest

from turnstile_sketch.core.hashing import InstanceTag, SeedSet
from turnstile_sketch.models.sample import SamplerConfig
from turnstile_sketch.models.sketch import SketchConfig
from turnstile_sketch.models.stream import StreamHeader
from turnstile_sketch.processors.conditioning import EmbeddingSketch
from turnstile_sketch.processors.count_sketch import SketchState, merge_snapshots, merge_states
from turnstile_sketch.processors.lp_sampler import LpSampler
from turnstile_sketch.processors.parameters import practical_config
from turnstile_sketch.processors.synthetic import SyntheticConfig, gen_synthetic, write_synthetic
from turnstile_sketch.utils.stream_io import iter_batches, write_stream_arrays


def _shards(rng, count):
    """Random split points cutting [0, count) into 2 to 8 pieces."""
    pieces = int(rng.integers(2, 9))
    cuts = np.sort(rng.choice(np.arange(1, count), size=pieces - 1, replace=False))
    return np.split(np.arange(count), cuts)


class TestShardedSketches:
    """Test merged shard sketches against sequential sketches."""

    @pytest.mark.integration
    def test_hundred_random_streams_merge_bit_exact(self, dyadic_stream):
        """Test 100 streams split into 2-8 shards merge to the sequential sketch exactly."""
        rng = np.random.default_rng(2024)
        for trial in range(100):
            n = int(rng.integers(5, 300))
            d = int(rng.integers(1, 6))
            count = int(rng.integers(50, 800))
            p = float(rng.choice([1.0, 1.5, 2.0]))
            config = SketchConfig(n=n, d=d, r=int(rng.integers(4, 64)), s=int(rng.integers(1, 9)), p=p)
            seeds = SeedSet(trial)
            rows, cols, values = dyadic_stream(n, d, count, seed=trial)

            sequential = SketchState(config, seeds)
            for i, j, v in zip(rows, cols, values):
                sequential.update_batch([i], [j], [v])

            states = [
                SketchState(config, seeds).update_batch(rows[part], cols[part], values[part])
                for part in _shards(rng, count)
            ]
            merged = merge_states(states)

            np.testing.assert_array_equal(merged.buckets, sequential.buckets, err_msg=f"trial {trial}")
            np.testing.assert_array_equal(merged.touched, sequential.touched)
            assert merged.update_count == sequential.update_count == count

    @pytest.mark.integration
    def test_snapshot_files_merge_like_states(self, tmp_path, dyadic_stream):
        """Test shards written to disk and merged reproduce the whole stream."""
        config = SketchConfig(n=400, d=3, r=128, s=9, p=1.5)
        seeds = SeedSet(77)
        rows, cols, values = dyadic_stream(400, 3, 3000, seed=5)
        whole = SketchState(config, seeds).update_batch(rows, cols, values)

        paths = []
        for index, part in enumerate(np.array_split(np.arange(3000), 5)):
            state = SketchState(config, seeds).update_batch(rows[part], cols[part], values[part])
            paths.append(state.save_snapshot(tmp_path / f"shard{index}.lpts"))
        merged = merge_snapshots(paths)

        np.testing.assert_array_equal(merged.buckets, whole.buckets)
        assert merged.extract_heavy().indices.tolist() == whole.extract_heavy().indices.tolist()

    @pytest.mark.integration
    def test_embedding_shards_merge(self, dyadic_stream):
        """Test the p-stable embedding is linear up to rounding."""
        rows, cols, values = dyadic_stream(300, 4, 2000, seed=8)
        seeds = SeedSet(3, InstanceTag.P_EMBEDDING)
        whole = EmbeddingSketch(300, 4, 1.0, seeds).ingest(rows, cols, values)
        left = EmbeddingSketch(300, 4, 1.0, seeds).ingest(rows[:700], cols[:700], values[:700])
        right = EmbeddingSketch(300, 4, 1.0, seeds).ingest(rows[700:], cols[700:], values[700:])
        np.testing.assert_allclose(left.merge(right).matrix, whole.matrix, rtol=1e-12, atol=1e-9)


class TestStreamPipeline:
    """Test generated streams flowing through files, shards and samplers."""

    @pytest.mark.integration
    def test_planted_row_through_stream_files(self, tmp_path):
        """Test a planted stream read back in batches recovers the planted row."""
        stream = gen_synthetic(
            SyntheticConfig(kind="planted-heavy", n=500, d=3, seed=4, heavy_scale=0.5)
        )
        path = write_synthetic(stream, tmp_path / "planted", binary=True)
        config = SketchConfig(n=500, d=3, r=256, s=11, p=1.0, threshold_factor=8.0)
        state = SketchState.from_batches(config, SeedSet(12), iter_batches(path, batch_size=333))

        heavy = state.extract_heavy()
        planted = stream.metadata["heavy_indices"][0]
        assert planted in heavy.indices.tolist()
        error = np.abs(heavy.row_for(planted) - stream.matrix[planted]).sum()
        assert error <= 0.05 * np.abs(stream.matrix[planted]).sum()

    @pytest.mark.integration
    def test_permuted_stream_same_heavy_rows(self, tmp_path):
        """Test the order of updates does not change what is extracted."""
        stream = gen_synthetic(SyntheticConfig(kind="harmonic-demo", n=300, d=2, seed=9))
        config = SketchConfig(n=300, d=2, r=128, s=9, p=1.0, threshold_factor=4.0)
        seeds = SeedSet(21)
        forward = SketchState(config, seeds).update_batch(stream.rows, stream.cols, stream.values)
        order = np.random.default_rng(1).permutation(len(stream))
        permuted_path = write_stream_arrays(
            tmp_path / "permuted.txt", StreamHeader(300, 2),
            stream.rows[order], stream.cols[order], stream.values[order],
        )
        permuted = SketchState.from_batches(config, seeds, iter_batches(permuted_path, batch_size=100))

        np.testing.assert_allclose(permuted.buckets, forward.buckets, rtol=1e-12, atol=1e-9)
        first, second = forward.extract_heavy(), permuted.extract_heavy()
        assert first.indices.tolist() == second.indices.tolist()
        np.testing.assert_allclose(first.rows, second.rows, rtol=1e-9, atol=1e-9)

    @pytest.mark.integration
    def test_sampler_shards_merge(self):
        """Test sampler shards merge to the same sample as one pass."""
        stream = gen_synthetic(SyntheticConfig(kind="gaussian", n=600, d=2, seed=13))
        sampler_config = SamplerConfig(k=20, p=1.0)
        sketch_config = practical_config(600, 2, 20, 1.0)

        whole = LpSampler(sampler_config, sketch_config, master_seed=6)
        whole.ingest(stream.rows, stream.cols, stream.values)

        halves = [LpSampler(sampler_config, sketch_config, master_seed=6) for _ in range(2)]
        cut = len(stream) // 2
        halves[0].ingest(stream.rows[:cut], stream.cols[:cut], stream.values[:cut])
        halves[1].ingest(stream.rows[cut:], stream.cols[cut:], stream.values[cut:])
        merged = halves[0].merge(halves[1])

        expected, actual = whole.sample(), merged.sample()
        assert actual.indices.tolist() == expected.indices.tolist()
        np.testing.assert_allclose(actual.rows, expected.rows, rtol=1e-9, atol=1e-9)
        assert actual.alpha == pytest.approx(expected.alpha, rel=1e-9)
