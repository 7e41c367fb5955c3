"""Seeded, stream-separated random number generation.

Every stochastic choice in a benchmark run draws from a counter-based
generator keyed by ``(seed, stream, *tags)``. Streams are independent, so
consuming more numbers in one stream (e.g. adding an estimator) never
perturbs draws in another.
"""

import zlib

import numpy as np

STREAM_HYPERPARAM = 0
STREAM_POLICY = 1
STREAM_BOOTSTRAP = 2
STREAM_MODEL = 3


def stream_rng(seed: int, stream: int, *tags: int) -> np.random.Generator:
    """Return the generator for stream `stream` of master seed `seed`.

    Extra integer `tags` (e.g. a per-estimator tag) key further independent
    substreams.
    """
    key = np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(int(t) for t in (stream, *tags))
    )
    return np.random.Generator(np.random.Philox(key))


def name_tag(name: str) -> int:
    """Stable integer tag for a string, for keying per-name substreams."""
    return zlib.crc32(name.encode("utf-8"))
