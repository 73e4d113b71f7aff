"""Counter-based random numbers (Philox4x32-10).

Every Gaussian draw in the library is a pure function of
``(master seed, stream, trajectory, step, draw slot)``.  Ensembles are
therefore order-independent and parallel-safe: any trajectory can be
regenerated in isolation, and reductions over trajectories commute.

The generator is the standard Philox4x32 with 10 rounds (Salmon et al.,
SC'11).  One counter block yields four 32-bit words, i.e. two 53-bit
uniforms, i.e. one Box-Muller pair of standard normals.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)

# Stream tags keep unrelated consumers of the same master seed independent.
STREAM_OU = 0  # stationary init + OU step noise
STREAM_FIELD = 1  # random test/diagnostic fields
STREAM_AUX = 2  # auxiliary solver noise
STREAM_MC = 3  # scalar Monte Carlo oracles


def split_seed(seed: int) -> tuple[np.uint32, np.uint32]:
    """Philox key words from a 64-bit master seed."""
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint32(s & 0xFFFFFFFF), np.uint32(s >> 32)


def philox4x32(key0, key1, c0, c1, c2, c3):
    """One Philox4x32-10 block per counter element. Inputs broadcast; uint32.

    Returns the four output words as uint32 arrays.
    """
    x0 = np.asarray(c0, dtype=np.uint32)
    x1 = np.asarray(c1, dtype=np.uint32)
    x2 = np.asarray(c2, dtype=np.uint32)
    x3 = np.asarray(c3, dtype=np.uint32)
    x0, x1, x2, x3 = np.broadcast_arrays(x0, x1, x2, x3)
    x0, x1, x2, x3 = (a.copy() for a in (x0, x1, x2, x3))
    k0 = np.uint32(key0)
    k1 = np.uint32(key1)
    with np.errstate(over="ignore"):  # uint32 wraparound is the point
        for _ in range(10):
            p0 = _M0 * x0.astype(np.uint64)
            p1 = _M1 * x2.astype(np.uint64)
            hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
            lo0 = (p0 & _MASK32).astype(np.uint32)
            hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
            lo1 = (p1 & _MASK32).astype(np.uint32)
            x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
            k0 = np.uint32((int(k0) + int(_W0)) & 0xFFFFFFFF)
            k1 = np.uint32((int(k1) + int(_W1)) & 0xFFFFFFFF)
    return x0, x1, x2, x3


def gaussian_pair(seed: int, stream: int, traj, step, draw):
    """Box-Muller pair of standard normals per (traj, step, draw). Broadcasts."""
    key0, key1 = split_seed(seed)
    o0, o1, o2, o3 = philox4x32(
        key0,
        key1,
        np.asarray(traj, dtype=np.uint32),
        np.asarray(step, dtype=np.uint32),
        np.asarray(draw, dtype=np.uint32),
        np.uint32(stream),
    )
    ua = o0.astype(np.uint64) | (o1.astype(np.uint64) << np.uint64(32))
    ub = o2.astype(np.uint64) | (o3.astype(np.uint64) << np.uint64(32))
    # u1 in (0,1] so log never sees 0; u2 in [0,1).
    u1 = ((ua >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53
    u2 = (ub >> np.uint64(11)).astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * np.pi) * u2
    return r * np.cos(theta), r * np.sin(theta)


def standard_normals(seed: int, stream: int, traj: int, step: int, count: int):
    """`count` standard normals for one (traj, step), consuming ceil(count/2) slots."""
    draws = np.arange((count + 1) // 2, dtype=np.uint32)
    z0, z1 = gaussian_pair(seed, stream, np.uint32(traj), np.uint32(step), draws)
    return np.stack([z0, z1], axis=-1).ravel()[:count]
