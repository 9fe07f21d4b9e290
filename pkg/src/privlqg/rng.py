"""Counter-based random streams for reproducible, order-independent trials.

The generator is pinned so golden traces are portable across platforms
and languages:

* ``mix64`` is the SplitMix64 finalizer (shift-xor-multiply, the widely
  published constants).
* Trial i of base seed s draws from the key ``mix64(s + (i+1) * PHI)``
  with PHI = 0x9E3779B97F4A7C15 (all arithmetic mod 2^64).
* Draw j of a key k is the uniform ``(mix64(k + (j+1) * PHI) >> 11 + 1)
  * 2^-53`` in (0, 1].
* Standard gaussians come from Box-Muller pairs: draws (2j, 2j+1) give
  ``sqrt(-2 ln u1) * (cos, sin)(2 pi u2)``; gaussian g is element g of
  that interleaved sequence.

Every quantity is a pure function of (seed, trial, index), so trials can
be generated in any order or in parallel with bitwise-identical results.
"""

from __future__ import annotations

import numpy as np

PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays (wraps mod 2^64)."""
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def trial_key(base_seed, trial):
    """Deterministic per-trial key: mix64(seed + (trial + 1) * PHI)."""
    base = np.uint64(int(base_seed) & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        t = np.uint64(int(trial) + 1)
        return mix64(base + t * PHI)


def uniforms(key, count):
    """count uniforms in (0, 1] for one stream key."""
    with np.errstate(over="ignore"):
        j = np.arange(1, count + 1, dtype=np.uint64)
        bits = mix64(np.uint64(key) + j * PHI)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53


def gaussians(key, count):
    """count standard gaussians via Box-Muller on the uniform stream."""
    pairs = (count + 1) // 2
    u = uniforms(key, 2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def gaussian_matrix(base_seed, trials, count):
    """(trials, count) gaussians; row i is the stream of trial i."""
    base = np.uint64(int(base_seed) & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        i = np.arange(1, trials + 1, dtype=np.uint64)
        keys = mix64(base + i * PHI)
        j = np.arange(1, 2 * ((count + 1) // 2) + 1, dtype=np.uint64)
        bits = mix64(keys[:, None] + j[None, :] * PHI)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u1, u2 = u[:, 0::2], u[:, 1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty((trials, u.shape[1]))
    out[:, 0::2] = radius * np.cos(angle)
    out[:, 1::2] = radius * np.sin(angle)
    return out[:, :count]
