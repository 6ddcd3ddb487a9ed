"""Counter-based random streams.

Every stream is a Philox4x64 generator keyed by the master seed; the
sample index and a small tag occupy the upper counter words, and draws
advance the lowest word.  Streams for distinct ``(index, tag)`` never
overlap for fewer than 2**128 draws, and the output is a pure function of
the triple on every platform.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def seed_stream(master_seed: int, sample_index: int, tag: int = 0) -> np.random.Generator:
    key = np.array([master_seed & MASK64, 0x9E3779B97F4A7C15], dtype=np.uint64)
    counter = np.array([0, 0, sample_index & MASK64, tag & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def uniform_block(master_seed: int, start: int, stop: int, width: int, tag: int = 0) -> np.ndarray:
    """Rows ``seed_stream(master_seed, i, tag).random(width)`` for i in [start, stop)."""
    out = np.empty((max(0, stop - start), width))
    for row, i in enumerate(range(start, stop)):
        out[row] = seed_stream(master_seed, i, tag).random(width)
    return out
