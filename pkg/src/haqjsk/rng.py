"""Named random sub-streams derived from a single run seed."""

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for the pipeline stage ``name``.

    The stream depends only on ``(seed, name)``, so a stage can be re-run on
    its own and still draw the same numbers.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode())]))


def substream_int(seed: int, name: str) -> int:
    return int(substream(seed, name).integers(0, 2**31 - 1))
