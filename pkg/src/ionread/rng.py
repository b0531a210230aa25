"""Counter-based random numbers (Philox4x32-10), vectorised over counters.

Every Monte Carlo trial owns the substream addressed by its 64-bit trial
index, so a trial's draws depend only on ``(seed, stream tag, trial index)``
and never on how trials are chunked or which thread runs them.

Counter layout: word0/word1 = trial index (lo/hi), word2 = block number
within the trial, word3 = stream tag.  The 64-bit seed is the key.
"""
from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
ROUNDS = 10


def philox4x32(counter, key, rounds=ROUNDS):
    """Philox4x32 bijection.

    ``counter`` is an ``(n, 4)`` array of 32-bit words, ``key`` a pair of
    32-bit words.  Returns an ``(n, 4)`` uint32 array.
    """
    c = np.asarray(counter, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = c[:, 0].copy(), c[:, 1].copy(), c[:, 2].copy(), c[:, 3].copy()
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=1).astype(np.uint32)


def seed_key(seed):
    """Split a non-negative integer seed (< 2**64) into two 32-bit key words."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must lie in [0, 2**64)")
    return seed & 0xFFFFFFFF, seed >> 32


def _to_unit(hi, lo):
    # 53-bit uniform in [0, 1)
    a = hi.astype(np.uint64) >> np.uint64(5)
    b = lo.astype(np.uint64) >> np.uint64(6)
    return (a * np.uint64(67108864) + b).astype(np.float64) * (1.0 / 9007199254740992.0)


def uniforms(seed, trial_index, block, tag=0):
    """Two uniforms in [0, 1) per trial from counter block ``block``.

    ``trial_index`` is an integer array; ``block`` is a scalar or an array
    broadcastable against it.  Returns an ``(n, 2)`` float array.
    """
    idx = np.asarray(trial_index, dtype=np.uint64).ravel()
    blk = np.broadcast_to(np.asarray(block, dtype=np.uint64), idx.shape)
    ctr = np.empty((idx.size, 4), dtype=np.uint64)
    ctr[:, 0] = idx & _MASK32
    ctr[:, 1] = idx >> _SHIFT32
    ctr[:, 2] = blk
    ctr[:, 3] = np.uint64(tag)
    words = philox4x32(ctr, seed_key(seed))
    return np.stack([_to_unit(words[:, 0], words[:, 1]),
                     _to_unit(words[:, 2], words[:, 3])], axis=1)
