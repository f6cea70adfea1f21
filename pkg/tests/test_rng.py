import numpy as np
import pytest

from perclab import rng


def test_spawn_seed_deterministic():
    assert rng.spawn_seed(42, 0) == rng.spawn_seed(42, 0)
    assert rng.spawn_seed(42, 0) != rng.spawn_seed(42, 1)
    assert rng.spawn_seed(42, 0) != rng.spawn_seed(43, 0)
    assert 0 <= rng.spawn_seed(42, 7) < 2**64


def test_stream_reproducible():
    a = rng.stream(123).random(8)
    b = rng.stream(123).random(8)
    assert np.array_equal(a, b)
    c = rng.stream(124).random(8)
    assert not np.array_equal(a, c)


def test_spawn_stream_matches_spawned_seed():
    direct = rng.stream(rng.spawn_seed(9, 3)).random(5)
    spawned = rng.spawn_stream(9, 3).random(5)
    assert np.array_equal(direct, spawned)


def test_spawn_indices_give_distinct_streams():
    draws = {tuple(rng.spawn_stream(5, k).random(4)) for k in range(32)}
    assert len(draws) == 32


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        rng.spawn_seed(-1, 0)
    with pytest.raises(ValueError):
        rng.spawn_seed(0, -1)
    with pytest.raises(ValueError):
        rng.stream(-5)
