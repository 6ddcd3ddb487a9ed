import numpy as np
from scipy.stats import chisquare

from dioclt.rng import seed_stream, uniform_block


def test_same_triple_same_stream():
    a = seed_stream(123, 7, 2).random(1000)
    b = seed_stream(123, 7, 2).random(1000)
    assert np.array_equal(a, b)


def test_distinct_index_and_tag_differ():
    base = seed_stream(123, 0, 0).random(1000)
    assert not np.array_equal(base, seed_stream(123, 1, 0).random(1000))
    assert not np.array_equal(base, seed_stream(123, 0, 1).random(1000))
    assert not np.array_equal(base, seed_stream(124, 0, 0).random(1000))


def test_streams_look_independent():
    a = seed_stream(5, 0, 0).random(100_000)
    b = seed_stream(5, 1, 0).random(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_uniformity_chi_square():
    x = seed_stream(2026, 0, 0).random(1_000_000)
    counts, _ = np.histogram(x, bins=64, range=(0, 1))
    assert chisquare(counts).pvalue > 0.001


def test_platform_fixed_values():
    # pins the generator so a platform or library change is caught
    first = seed_stream(0, 0, 0).integers(0, 2**32, 3, dtype=np.uint64)
    assert first.tolist() == [1550410273, 729454207, 2901254911]
    assert seed_stream(2026, 5, 1).random() == 0.22103482472561842


def test_uniform_block_rows_are_streams():
    block = uniform_block(9, 3, 6, 2, tag=1)
    for row, i in zip(block, range(3, 6)):
        assert np.array_equal(row, seed_stream(9, i, 1).random(2))


def test_large_seed_and_index():
    x = seed_stream(2**64 - 1, 2**63, 5).random(4)
    assert np.all((0 <= x) & (x < 1))
