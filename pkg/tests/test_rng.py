import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from binomial_di import rng


def test_child_streams_differ():
    a = rng.generator(rng.child(7, 0)).random(4)
    b = rng.generator(rng.child(7, 1)).random(4)
    assert not np.array_equal(a, b)


def test_child_is_reproducible():
    assert rng.describe(rng.child(7, 3, 2)) == rng.describe(rng.child(7, 3, 2))


@settings(max_examples=30, deadline=None)
@given(trials=st.integers(1, 20_000), block=st.integers(1, 5000))
def test_block_sizes_cover_trials(trials, block):
    sizes = rng.block_sizes(trials, block)
    assert sum(sizes) == trials and all(0 < s <= block for s in sizes)


def test_run_blocks_independent_of_threads():
    def fn(gen, size):
        return np.array([np.count_nonzero(gen.random(size) < 0.3), size])

    one = rng.run_blocks(fn, 11, 50_000, threads=1)
    four = rng.run_blocks(fn, 11, 50_000, threads=4)
    assert np.array_equal(one, four)
    assert one[1] == 50_000
