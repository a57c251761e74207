"""Pure-Python fallback for the compiled kernels.

Scalar paths are plain integer arithmetic; batch paths vectorise SipHash over
numpy ``uint64`` arrays, which wrap on overflow exactly like the C version.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_MASK = 0xFFFFFFFFFFFFFFFF


def _rotl(x: int, b: int) -> int:
    return ((x << b) | (x >> (64 - b))) & _MASK


def _rounds(v0: int, v1: int, v2: int, v3: int, count: int) -> tuple[int, int, int, int]:
    for _ in range(count):
        v0 = (v0 + v1) & _MASK
        v1 = _rotl(v1, 13) ^ v0
        v0 = _rotl(v0, 32)
        v2 = (v2 + v3) & _MASK
        v3 = _rotl(v3, 16) ^ v2
        v0 = (v0 + v3) & _MASK
        v3 = _rotl(v3, 21) ^ v0
        v2 = (v2 + v1) & _MASK
        v1 = _rotl(v1, 17) ^ v2
        v2 = _rotl(v2, 32)
    return v0, v1, v2, v3


def _init(k0: int, k1: int) -> tuple[int, int, int, int]:
    k0 &= _MASK
    k1 &= _MASK
    return (
        k0 ^ 0x736F6D6570736575,
        k1 ^ 0x646F72616E646F6D,
        k0 ^ 0x6C7967656E657261,
        k1 ^ 0x7465646279746573,
    )


def siphash24(k0: int, k1: int, data: bytes) -> int:
    """SipHash-2-4 of a byte string under the 128-bit key (k0, k1)."""
    data = bytes(data)
    v0, v1, v2, v3 = _init(k0, k1)
    end = len(data) - len(data) % 8
    for i in range(0, end, 8):
        m = int.from_bytes(data[i : i + 8], "little")
        v3 ^= m
        v0, v1, v2, v3 = _rounds(v0, v1, v2, v3, 2)
        v0 ^= m
    m = ((len(data) & 0xFF) << 56) | int.from_bytes(data[end:], "little")
    v3 ^= m
    v0, v1, v2, v3 = _rounds(v0, v1, v2, v3, 2)
    v0 ^= m
    v2 ^= 0xFF
    v0, v1, v2, v3 = _rounds(v0, v1, v2, v3, 4)
    return v0 ^ v1 ^ v2 ^ v3


def siphash24_u64(k0: int, k1: int, m: int) -> int:
    """SipHash-2-4 of a single little-endian 64-bit word."""
    return siphash24(k0, k1, (m & _MASK).to_bytes(8, "little"))


def _np_rotl(x: np.ndarray, b: int) -> np.ndarray:
    return (x << np.uint64(b)) | (x >> np.uint64(64 - b))


def siphash24_u64_array(k0: int, k1: int, msgs) -> np.ndarray:
    m = np.ascontiguousarray(msgs, dtype=np.uint64)
    s0, s1, s2, s3 = _init(k0, k1)
    v0 = np.full(m.shape, s0, dtype=np.uint64)
    v1 = np.full(m.shape, s1, dtype=np.uint64)
    v2 = np.full(m.shape, s2, dtype=np.uint64)
    v3 = np.full(m.shape, s3, dtype=np.uint64)

    def rounds(count: int) -> None:
        nonlocal v0, v1, v2, v3
        for _ in range(count):
            v0 = v0 + v1
            v1 = _np_rotl(v1, 13) ^ v0
            v0 = _np_rotl(v0, 32)
            v2 = v2 + v3
            v3 = _np_rotl(v3, 16) ^ v2
            v0 = v0 + v3
            v3 = _np_rotl(v3, 21) ^ v0
            v2 = v2 + v1
            v1 = _np_rotl(v1, 17) ^ v2
            v2 = _np_rotl(v2, 32)

    v3 = v3 ^ m
    rounds(2)
    v0 = v0 ^ m
    tail = np.uint64(8 << 56)
    v3 = v3 ^ tail
    rounds(2)
    v0 = v0 ^ tail
    v2 = v2 ^ np.uint64(0xFF)
    rounds(4)
    return v0 ^ v1 ^ v2 ^ v3


def nearest_key(keys, r: int) -> int:
    """Index of the key closest to r; equal distances go to the larger key."""
    best = -1
    best_d = 0
    best_k = 0
    for i, k in enumerate(int(x) for x in np.asarray(keys, dtype=np.uint64)):
        d = abs(k - r)
        if best < 0 or d < best_d or (d == best_d and k > best_k):
            best, best_d, best_k = i, d, k
    if best < 0:
        raise ValueError("no keys")
    return best


def pairwise_common_honest(membership, honest) -> bool:
    """True iff every pair of rows shares at least one column that is set in both and honest."""
    m = np.asarray(membership, dtype=bool)
    h = np.asarray(honest, dtype=bool)
    if h.shape[0] != m.shape[1]:
        raise ValueError("honest mask length must match membership columns")
    sub = m[:, h].astype(np.int32)
    shared = sub @ sub.T
    iu = np.triu_indices(m.shape[0], k=1)
    return bool(np.all(shared[iu] > 0))
