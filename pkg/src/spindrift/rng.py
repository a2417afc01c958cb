"""Counter-based random numbers for reproducible parallel sampling.

Every variate is a pure function of (master seed, trajectory index, step
index, slot), so ensembles are bit-identical under any execution schedule:
chunked, threaded, or reordered evaluation cannot change the stream.

The generator is Threefry-2x32 with 20 rounds. Uniform doubles take 53 bits
from one 64-bit block; normals use Box-Muller with fixed consumption
(two uniforms per pair), never a rejection loop.
"""

from __future__ import annotations

import numpy as np

_ROTATIONS = (13, 15, 26, 6, 17, 29, 16, 24)
_PARITY = np.uint32(0x1BD11BDA)
_U32 = np.uint32
_TWO_TO_MINUS_53 = 2.0 ** -53


def _rotl(x: np.ndarray, d: int) -> np.ndarray:
    return (x << _U32(d)) | (x >> _U32(32 - d))


def threefry2x32(k0, k1, x0, x1):
    """Threefry-2x32-20 block function, vectorized over counter arrays."""
    k0 = _U32(k0)
    k1 = _U32(k1)
    ks2 = _U32(k0 ^ k1 ^ _PARITY)
    keys = (k0, k1, ks2)
    x0 = np.asarray(x0, dtype=np.uint32)
    x1 = np.asarray(x1, dtype=np.uint32)
    with np.errstate(over="ignore"):
        x0 = x0 + k0
        x1 = x1 + k1
        for block in range(5):
            rots = _ROTATIONS[:4] if block % 2 == 0 else _ROTATIONS[4:]
            for d in rots:
                x0 = x0 + x1
                x1 = _rotl(x1, d)
                x1 = x1 ^ x0
            x0 = x0 + keys[(block + 1) % 3]
            x1 = x1 + keys[(block + 2) % 3] + _U32(block + 1)
    return x0, x1


def _split_seed(seed: int) -> tuple[np.uint32, np.uint32]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return _U32(seed & 0xFFFFFFFF), _U32(seed >> 32)


def counter_uniforms(seed: int, lane, slot) -> np.ndarray:
    """Uniform doubles in (0, 1), one per (lane, slot) counter pair.

    ``lane`` and ``slot`` broadcast against each other; each output consumes
    one 64-bit Threefry block, keyed by the 64-bit master seed.
    """
    k0, k1 = _split_seed(seed)
    lane = np.asarray(lane, dtype=np.uint32)
    slot = np.asarray(slot, dtype=np.uint32)
    lane, slot = np.broadcast_arrays(lane, slot)
    y0, y1 = threefry2x32(k0, k1, lane, slot)
    bits = (y0.astype(np.uint64) << np.uint64(32)) | y1.astype(np.uint64)
    # (mantissa + 0.5) * 2^-53 lies strictly inside (0, 1), safe for log().
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_TO_MINUS_53


def step_normals(seed: int, step: int, n_traj: int, n_normals: int) -> np.ndarray:
    """Standard normals for one time step, shape (n_traj, n_normals).

    Slot layout reserves 8 uniforms per step, so steps up to 2^29 and any
    trajectory count below 2^32 have disjoint counters.
    """
    if n_normals > 8:
        raise ValueError("at most 8 normals per step are supported")
    n_pairs = (n_normals + 1) // 2
    lanes = np.arange(n_traj, dtype=np.uint32)[:, None]
    base = np.uint32((int(step) << 3) & 0xFFFFFFFF)
    out = np.empty((n_traj, 2 * n_pairs), dtype=np.float64)
    with np.errstate(over="ignore"):
        for pair in range(n_pairs):
            u1 = counter_uniforms(seed, lanes, base + _U32(2 * pair))[:, 0]
            u2 = counter_uniforms(seed, lanes, base + _U32(2 * pair + 1))[:, 0]
            radius = np.sqrt(-2.0 * np.log(u1))
            angle = 2.0 * np.pi * u2
            out[:, 2 * pair] = radius * np.cos(angle)
            out[:, 2 * pair + 1] = radius * np.sin(angle)
    return out[:, :n_normals]
