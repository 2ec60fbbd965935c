"""Counter-based SplitMix64 streams for reproducible resampling.

Every replicate ``b`` of a run seeded with ``seed`` gets its own sub-seed::

    sub_seed(seed, b) = mix64(seed + (b + 1) * GOLDEN)          (mod 2**64)

and the ``k``-th uniform of that replicate is::

    u(b, k) = (mix64(sub_seed + (k + 1) * GOLDEN) >> 11) * 2**-53

``mix64`` is the SplitMix64 finalizer. Because both levels are pure functions
of integers, a replicate can be regenerated in isolation, in any order, in any
language, bit for bit. Independent streams for different purposes (e.g.
subsampling distances vs. bootstrapping tally units) are separated with
``stream``: a nonzero stream first remixes the seed.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD1B54A32D192ED03
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_seed(seed: int, stream: int = 0) -> int:
    seed &= MASK64
    if stream == 0:
        return seed
    return mix64(seed ^ ((stream * _STREAM_SALT) & MASK64))


def sub_seed(seed: int, index: int, stream: int = 0) -> int:
    """Seed of replicate ``index``; pure function of its arguments."""
    base = stream_seed(seed, stream)
    return mix64((base + (index + 1) * GOLDEN) & MASK64)


def uniforms(seed: int, count: int) -> list[float]:
    """Reference (pure Python) uniform stream for one sub-seed."""
    return [(mix64((seed + (k + 1) * GOLDEN) & MASK64) >> 11) * _INV_2_53 for k in range(count)]


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def sub_seeds(seed: int, indices, stream: int = 0) -> np.ndarray:
    """Vectorized :func:`sub_seed` over an array of replicate indices."""
    base = np.uint64(stream_seed(seed, stream))
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_array(base + (idx + np.uint64(1)) * np.uint64(GOLDEN))


def uniform_matrix(seeds: np.ndarray, count: int) -> np.ndarray:
    """Uniforms in [0, 1), one row per sub-seed, ``count`` columns.

    Row ``i`` equals ``uniforms(int(seeds[i]), count)`` exactly.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    k = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64_array(seeds[:, None] + k[None, :] * np.uint64(GOLDEN))
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
