"""Unit tests for counter-based hashing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turnstile_sketch.core.exceptions import SketchValidationError
from turnstile_sketch.core.hashing import (
    HashDomain,
    InstanceTag,
    SeedSet,
    bucket_of,
    hash64,
    scale_of,
    sign_of,
    uniform_of,
)


class TestSeedSet:
    """Test SeedSet validation."""

    def test_default_tag_is_heavy_hitter(self):
        """Test the default instance tag."""
        assert SeedSet(7).instance_tag == InstanceTag.HEAVY_HITTER

    def test_with_tag_keeps_master_seed(self):
        """Test switching the instance tag."""
        seeds = SeedSet(7).with_tag(InstanceTag.P_SAMPLER_DRAW)
        assert seeds.master_seed == 7
        assert seeds.instance_tag == int(InstanceTag.P_SAMPLER_DRAW)

    @pytest.mark.parametrize("seed", [-1, 2 ** 64])
    def test_master_seed_out_of_range(self, seed):
        """Test seeds outside u64 are rejected."""
        with pytest.raises(SketchValidationError):
            SeedSet(seed)

    def test_negative_tag_rejected(self):
        """Test negative instance tags are rejected."""
        with pytest.raises(SketchValidationError):
            SeedSet(1, -3)


class TestBucketAndSign:
    """Test bucket_of and sign_of."""

    def test_scalar_inputs_return_python_ints(self, seeds):
        """Test scalar calls return plain ints."""
        bucket = bucket_of(seeds, 5, 2, 17)
        sign = sign_of(seeds, 5, 2)
        assert isinstance(bucket, int) and 0 <= bucket < 17
        assert sign in (-1, 1)

    def test_array_matches_scalar(self, seeds):
        """Test vectorized and scalar calls agree."""
        rows = np.arange(40)
        buckets = bucket_of(seeds, rows, 3, 11)
        signs = sign_of(seeds, rows, 3)
        assert buckets.dtype == np.int64
        for i in range(40):
            assert buckets[i] == bucket_of(seeds, i, 3, 11)
            assert signs[i] == sign_of(seeds, i, 3)

    def test_broadcast_over_repetitions(self, seeds):
        """Test (s, m) broadcasting of rows against repetitions."""
        buckets = bucket_of(seeds, np.arange(6)[None, :], np.arange(4)[:, None], 9)
        assert buckets.shape == (4, 6)
        assert buckets[2, 5] == bucket_of(seeds, 5, 2, 9)

    def test_deterministic_across_calls(self):
        """Test the same seeds give the same hashes."""
        a = bucket_of(SeedSet(99), np.arange(100), 0, 64)
        b = bucket_of(SeedSet(99), np.arange(100), 0, 64)
        np.testing.assert_array_equal(a, b)

    def test_tags_are_independent_instances(self):
        """Test different instance tags give different bucket maps."""
        a = bucket_of(SeedSet(99, 1), np.arange(200), 0, 64)
        b = bucket_of(SeedSet(99, 2), np.arange(200), 0, 64)
        assert np.mean(a == b) < 0.1

    def test_buckets_roughly_uniform(self, seeds):
        """Test bucket frequencies over many rows."""
        buckets = bucket_of(seeds, np.arange(80_000), 0, 8)
        counts = np.bincount(buckets, minlength=8)
        assert np.all(np.abs(counts - 10_000) < 600)

    def test_signs_balanced(self, seeds):
        """Test signs are +1 about half of the time."""
        signs = sign_of(seeds, np.arange(20_000), 1)
        assert set(np.unique(signs).tolist()) == {-1.0, 1.0}
        assert abs(np.mean(signs)) < 0.05

    def test_invalid_bucket_count(self, seeds):
        """Test r < 1 is rejected."""
        with pytest.raises(SketchValidationError):
            bucket_of(seeds, 0, 0, 0)


class TestScale:
    """Test scale_of and uniform_of."""

    def test_scale_in_open_interval(self, seeds):
        """Test t_i never hits 0 or 1."""
        t = scale_of(seeds, np.arange(100_000))
        assert np.all(t > 0.0) and np.all(t < 1.0)

    def test_scale_scalar(self, seeds):
        """Test scalar scale is a float."""
        assert isinstance(scale_of(seeds, 3), float)

    def test_scale_mean(self, seeds):
        """Test t_i averages to about 1/2."""
        t = scale_of(seeds, np.arange(50_000))
        assert abs(np.mean(t) - 0.5) < 0.01

    def test_domains_differ(self, seeds):
        """Test the angle and exponential domains are not the same stream."""
        a = uniform_of(seeds, HashDomain.STABLE_ANGLE, np.arange(100), 0)
        b = uniform_of(seeds, HashDomain.STABLE_EXPONENTIAL, np.arange(100), 0)
        assert not np.allclose(a, b)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 62), st.integers(min_value=0, max_value=1000))
    def test_hash_is_pure(self, i, j):
        """Test hash64 depends only on its arguments."""
        seeds = SeedSet(2024, 3)
        first = hash64(seeds, HashDomain.BUCKET, i, j)
        second = hash64(seeds, HashDomain.BUCKET, np.array([i]), np.array([j]))
        assert first[0] == second[0]
