import numpy as np
import pytest

from src.utils.rng import shard_sizes, stream

class TestStream:
    def test_reproducible(self):
        assert np.array_equal(stream(5).random(8), stream(5).random(8))

    def test_shards_differ(self):
        assert not np.array_equal(stream(5, 0).random(8), stream(5, 1).random(8))

    def test_seeds_differ(self):
        assert not np.array_equal(stream(5).random(8), stream(6).random(8))

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            stream(-1)

class TestShardSizes:
    def test_split(self):
        assert shard_sizes(10, 4) == [4, 4, 2]
        assert shard_sizes(8, 4) == [4, 4]
        assert shard_sizes(0, 4) == []

    def test_invalid(self):
        with pytest.raises(ValueError):
            shard_sizes(5, 0)
