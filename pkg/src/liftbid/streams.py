"""Named random substreams derived from a single integer seed."""

import zlib

import numpy as np


def substream(seed: int, *names: str) -> np.random.Generator:
    """Independent generator for the path `names` under `seed`.

    The same (seed, names) always yields the same stream, and distinct paths
    never share state, so arms can be simulated in any order.
    """
    key = tuple(zlib.crc32(n.encode()) for n in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
