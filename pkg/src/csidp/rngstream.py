"""Deterministic counter-based random streams.

Every random quantity in this package (synthetic channel draws, Gaussian
release noise, random importance maps) comes from a Philox4x64-10 counter
generator with an explicitly constructed 128-bit key, so any independent
implementation can reproduce the exact same values from the documented
recipe below.

Key layout (128 bits)::

    key = (domain << 96) | ((seed mod 2^64) << 32) | (index mod 2^32)

where ``domain`` is one of the ``DOM_*`` codes, ``seed`` is the caller's
64-bit seed and ``index`` is a stream counter (window index, block index,
subject id, ...).  From a keyed stream we take raw 64-bit words in counter
order and map them to:

* uniforms in (0, 1):   ``u = ((w >> 11) + 0.5) * 2^-53``
* standard normals:     ``z = ndtri(u)``  (inverse normal CDF)

The stream identifier recorded in release manifests is
:data:`STREAM_ID`; bump it if any part of the recipe changes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

STREAM_ID = "philox4x64-10/u53/invcdf-v1"

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1

# Domain codes (fit in 32 bits; the key layout gives them the top word).
DOM_ROOM = 0x01
DOM_SUBJECT = 0x02
DOM_ACTIVITY = 0x03
DOM_WINDOW = 0x04
DOM_PACKET_DROP = 0x05
DOM_RELEASE_NOISE = 0x06
DOM_RANDOM_MAP = 0x07
DOM_TRAIN_SHUFFLE = 0x08
DOM_SPLIT = 0x09


def stream_key(domain: int, seed: int, index: int = 0) -> int:
    """Build the 128-bit Philox key for (domain, seed, index)."""
    return ((domain & _MASK32) << 96) | ((seed & _MASK64) << 32) | (index & _MASK32)


def raw_words(domain: int, seed: int, index: int, n: int) -> np.ndarray:
    """First ``n`` raw 64-bit words of the keyed stream."""
    gen = np.random.Philox(key=stream_key(domain, seed, index))
    return gen.random_raw(n)


def uniforms(domain: int, seed: int, index: int, n: int) -> np.ndarray:
    """``n`` uniforms in the open interval (0, 1)."""
    w = raw_words(domain, seed, index, n)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(domain: int, seed: int, index: int, n: int) -> np.ndarray:
    """``n`` standard normal deviates via the inverse CDF."""
    return ndtri(uniforms(domain, seed, index, n))


def derive_seed(seed: int, salt: int) -> int:
    """Derive a child 64-bit seed with a splitmix64 finalizer.

    Used to give every window its own generator seed while keeping the
    parent/child relationship reproducible and documented.
    """
    x = (seed ^ (salt * 0x9E3779B97F4A7C15)) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)
