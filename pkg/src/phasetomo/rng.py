"""Counter-based random streams.

Every stochastic draw in the package comes from a Philox generator keyed by
``(seed, *keys)``. Two calls with the same key tuple produce the same numbers
regardless of call order, process, or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np

_SALTS: dict[str, int] = {}


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        k = int(key)
        if k < 0:
            # keep negative cell indices distinct from positive ones
            k = (1 << 63) + (-k)
        return k
    if isinstance(key, str):
        if key not in _SALTS:
            digest = hashlib.sha256(key.encode()).digest()
            _SALTS[key] = int.from_bytes(digest[:8], "little")
        return _SALTS[key]
    raise TypeError(f"stream keys must be int or str, got {type(key).__name__}")


def stream(seed: int, *keys) -> np.random.Generator:
    """Return an independent generator for the stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
