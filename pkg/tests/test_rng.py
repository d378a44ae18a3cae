import numpy as np

from majoritylab import rng


def test_streams_reproducible():
    a = rng.stream(7, rng.SIGNALS, 3).random(100)
    b = rng.stream(7, rng.SIGNALS, 3).random(100)
    assert np.array_equal(a, b)


def test_streams_independent_across_ids_and_indices():
    base = rng.stream(7, rng.SIGNALS, 0).random(100)
    other_stream = rng.stream(7, rng.SCHEDULE, 0).random(100)
    other_index = rng.stream(7, rng.SIGNALS, 1).random(100)
    other_seed = rng.stream(8, rng.SIGNALS, 0).random(100)
    assert not np.array_equal(base, other_stream)
    assert not np.array_equal(base, other_index)
    assert not np.array_equal(base, other_seed)
