"""Counter-based random number streams for reproducible parallel work.

Bootstrap replicates and simulation replicates each get their own stream,
keyed by ``(seed, index)`` through the Philox counter-based generator.
Stream ``r`` therefore produces the same values no matter how many worker
threads are running or in what order replicates execute, which is what makes
study and bootstrap output byte-identical across thread counts.
"""

import numpy as np

__all__ = ["substream"]

_MASK64 = (1 << 64) - 1


def substream(seed, index):
    """Return the generator for stream ``index`` of the family ``seed``.

    Parameters
    ----------
    seed : int
        User-facing seed identifying the family of streams.
    index : int
        Stream number within the family (replicate index, dataset index).
        Distinct indices give statistically independent streams.

    Returns
    -------
    numpy.random.Generator
        Generator whose output depends only on ``(seed, index)``.
    """
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
