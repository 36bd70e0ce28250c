"""Counter-based random streams for reproducible sign generation.

Every tree node owns one 64-bit uniform word, derived by hashing
(seed, node index) with a SplitMix64-style mixer.  Because the draw is a
pure function of the node's absolute index, any subtree can be
regenerated bit-identically without replaying the rest of the tree, and
level generation can be chunked or parallelized in any order.

Stream layout (fixed; part of the reproducibility contract):

  * nodes of the b-ary tree are numbered breadth-first starting at the
    first child generation: level L >= 1, in-level index j in [0, b^L)
    maps to  node_index = (b^L - b) // (b - 1) + j
  * the per-node word is  mix64(premix(seed) + (node_index + 1) * GOLDEN)
  * a node's sign is -1 iff its word is >= round(p_plus * 2^64)

Changing any of these constants changes every field drawn from a given
seed, so they are frozen here rather than configurable.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

#: 2^64 as a Python int, for threshold arithmetic done outside uint64.
_TWO64 = 1 << 64


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = x.copy()
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def premix_seed(seed: int) -> np.uint64:
    """Scramble the user seed once so nearby seeds give unrelated streams."""
    s = np.array([seed & (_TWO64 - 1)], dtype=np.uint64)
    s += GOLDEN  # array add: wraps mod 2^64 without the scalar warning
    return mix64(s)[0]


def node_words(seed_state: np.uint64, node_index: np.ndarray) -> np.ndarray:
    """Uniform 64-bit words for the given absolute node indices.

    ``seed_state`` must come from :func:`premix_seed`; ``node_index`` is a
    uint64 array.  Vectorized, allocation is one array per call.
    """
    ctr = (node_index + np.uint64(1)) * GOLDEN
    return mix64(ctr + seed_state)


def level_offset(base: int, level: int) -> int:
    """Absolute index of the first node at ``level`` (level >= 1)."""
    return (base**level - base) // (base - 1)


def sign_threshold(p_plus: float) -> int:
    """Integer T such that a word u encodes +1 iff u < T.

    Returned as a Python int because p_plus = 1 needs T = 2^64, which
    does not fit in uint64.
    """
    if p_plus >= 1.0:
        return _TWO64
    if p_plus <= 0.0:
        return 0
    return int(round(p_plus * _TWO64))


def sign_bits(seed_state: np.uint64, base: int, level: int, start: int,
              count: int, threshold: int) -> np.ndarray:
    """Sign bits (0 = +1, 1 = -1) for a contiguous run of level nodes.

    ``start`` is the in-level index of the first node; ``threshold``
    comes from :func:`sign_threshold`.
    """
    if threshold >= _TWO64:
        return np.zeros(count, dtype=np.uint8)
    if threshold <= 0:
        return np.ones(count, dtype=np.uint8)
    first = level_offset(base, level) + start
    idx = np.arange(first, first + count, dtype=np.uint64)
    words = node_words(seed_state, idx)
    return (words >= np.uint64(threshold)).astype(np.uint8)
