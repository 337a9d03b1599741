"""Counter-based random streams (Philox) with platform-stable draws.

Uniforms come straight from the raw 64-bit Philox output and normals use the
inverse normal CDF, so datasets do not depend on numpy's sampler internals.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_TWO_M53 = 2.0 ** -53


def _key_words(keys) -> list[int]:
    words = []
    for k in keys:
        if isinstance(k, str):
            words.extend(k.encode("utf-8"))
            words.append(0x1F)
        else:
            k = int(k)
            if k < 0:
                raise ValueError(f"seed components must be non-negative, got {k}")
            words.append(k)
    return words


def derive_seed(*keys) -> int:
    """A 63-bit integer seed derived deterministically from ``keys``."""
    state = np.random.SeedSequence(_key_words(keys)).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def stream(*keys) -> np.random.Philox:
    """Philox bit generator keyed by ``keys`` (ints or short strings)."""
    key = np.random.SeedSequence(_key_words(keys)).generate_state(2, np.uint64)
    return np.random.Philox(key=key)


def uniforms(bitgen: np.random.Philox, size: int) -> np.ndarray:
    """Open-interval (0, 1) uniforms built from 53 raw bits each."""
    raw = bitgen.random_raw(int(size))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def normals(bitgen: np.random.Philox, size: int) -> np.ndarray:
    return ndtri(uniforms(bitgen, size))

