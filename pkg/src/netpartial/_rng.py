"""Seed derivation.

Every stochastic routine takes one integer seed. Sub-streams are derived
from it with a stable integer hash (dyad samplers need a raw 64-bit state)
or through numpy ``SeedSequence`` (everything that wants a ``Generator``).
Derivations are pure functions of the inputs, so replays and worker pools
see the same streams regardless of execution order.
"""

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLD = 0x9E3779B97F4A7C15


def _fmix(z):
    z &= _MASK
    z ^= z >> 33
    z = (z * 0xFF51AFD7ED558CCD) & _MASK
    z ^= z >> 33
    z = (z * 0xC4CEB9FE1A85EC53) & _MASK
    z ^= z >> 33
    return z


def substream(seed, *tags):
    """Derive a 64-bit sub-seed from ``seed`` and integer tags."""
    h = _fmix((int(seed) + _GOLD) & _MASK)
    for t in tags:
        h = _fmix(h ^ (((int(t) + 1) * _GOLD) & _MASK))
    return h


def generator(seed, *tags):
    """numpy Generator on the sub-stream named by ``tags``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & _MASK, *map(int, tags)]))


def stable_key(values):
    """Order-insensitive 64-bit key of an integer collection.

    Used to seed per-cluster draws by cluster content rather than label, so
    relabeling clusters leaves the draws unchanged.
    """
    h = 0
    for v in values:
        h ^= _fmix((int(v) + _GOLD) & _MASK)
    return _fmix(h)
