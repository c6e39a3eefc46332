import zlib

import numpy as np

SPLIT = "split"
SUBSAMPLE = "subsample"
SYNTH = "synth"


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for the named sub-stream of ``seed``.

    Components draw from their own stream, so changing how one of them consumes
    randomness never shifts another.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))
