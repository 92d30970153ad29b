"""Counter-based random streams.

Every Monte Carlo loop in the package derives one stream per replica from
(master seed, stream index).  Streams use Philox with the master seed as key
and the stream index planted in the high 128 bits of the 256-bit counter, so
distinct indices own disjoint counter blocks and are reproducible without any
global state.
"""

import numpy as np

STREAM_ALGORITHM = "philox4x64(key=master_seed, counter=stream_index<<128)"


def derive_rng_stream(master_seed: int, stream_index: int = 0) -> np.random.Generator:
    """Return the reproducible generator for one (seed, index) pair."""
    if master_seed < 0 or stream_index < 0:
        raise ValueError("master_seed and stream_index must be nonnegative")
    bitgen = np.random.Philox(counter=int(stream_index) << 128,
                              key=int(master_seed) & (2 ** 64 - 1))
    return np.random.Generator(bitgen)


def as_generator(seed) -> np.random.Generator:
    """Accept either an integer master seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return derive_rng_stream(int(seed), 0)
