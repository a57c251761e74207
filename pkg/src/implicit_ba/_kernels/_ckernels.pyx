# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: SipHash-2-4, batch lottery hashing, leader search, referee coverage."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, uint8_t, int64_t

cnp.import_array()

BACKEND = "cython"


cdef inline uint64_t _rotl(uint64_t x, int b) noexcept nogil:
    return (x << b) | (x >> (64 - b))


cdef inline void _round(uint64_t* v0, uint64_t* v1, uint64_t* v2, uint64_t* v3) noexcept nogil:
    v0[0] += v1[0]
    v1[0] = _rotl(v1[0], 13)
    v1[0] ^= v0[0]
    v0[0] = _rotl(v0[0], 32)
    v2[0] += v3[0]
    v3[0] = _rotl(v3[0], 16)
    v3[0] ^= v2[0]
    v0[0] += v3[0]
    v3[0] = _rotl(v3[0], 21)
    v3[0] ^= v0[0]
    v2[0] += v1[0]
    v1[0] = _rotl(v1[0], 17)
    v1[0] ^= v2[0]
    v2[0] = _rotl(v2[0], 32)


cdef uint64_t _sip(uint64_t k0, uint64_t k1, const uint8_t* data, Py_ssize_t length) noexcept nogil:
    cdef uint64_t v0 = k0 ^ 0x736f6d6570736575ULL
    cdef uint64_t v1 = k1 ^ 0x646f72616e646f6dULL
    cdef uint64_t v2 = k0 ^ 0x6c7967656e657261ULL
    cdef uint64_t v3 = k1 ^ 0x7465646279746573ULL
    cdef Py_ssize_t end = length - (length % 8)
    cdef Py_ssize_t i
    cdef int j
    cdef uint64_t m
    i = 0
    while i < end:
        m = 0
        for j in range(8):
            m |= (<uint64_t>data[i + j]) << (8 * j)
        v3 ^= m
        _round(&v0, &v1, &v2, &v3)
        _round(&v0, &v1, &v2, &v3)
        v0 ^= m
        i += 8
    m = (<uint64_t>(length & 0xff)) << 56
    for j in range(length % 8):
        m |= (<uint64_t>data[end + j]) << (8 * j)
    v3 ^= m
    _round(&v0, &v1, &v2, &v3)
    _round(&v0, &v1, &v2, &v3)
    v0 ^= m
    v2 ^= 0xff
    for j in range(4):
        _round(&v0, &v1, &v2, &v3)
    return v0 ^ v1 ^ v2 ^ v3


cdef inline uint64_t _sip_word(uint64_t k0, uint64_t k1, uint64_t m) noexcept nogil:
    # 8-byte message: one full block plus the length-only final block
    cdef uint64_t v0 = k0 ^ 0x736f6d6570736575ULL
    cdef uint64_t v1 = k1 ^ 0x646f72616e646f6dULL
    cdef uint64_t v2 = k0 ^ 0x6c7967656e657261ULL
    cdef uint64_t v3 = k1 ^ 0x7465646279746573ULL
    cdef uint64_t b = (<uint64_t>8) << 56
    v3 ^= m
    _round(&v0, &v1, &v2, &v3)
    _round(&v0, &v1, &v2, &v3)
    v0 ^= m
    v3 ^= b
    _round(&v0, &v1, &v2, &v3)
    _round(&v0, &v1, &v2, &v3)
    v0 ^= b
    v2 ^= 0xff
    _round(&v0, &v1, &v2, &v3)
    _round(&v0, &v1, &v2, &v3)
    _round(&v0, &v1, &v2, &v3)
    _round(&v0, &v1, &v2, &v3)
    return v0 ^ v1 ^ v2 ^ v3


def siphash24(k0, k1, const uint8_t[:] data):
    """SipHash-2-4 of a byte string under the 128-bit key (k0, k1)."""
    cdef uint64_t a = <uint64_t>(k0 & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t b = <uint64_t>(k1 & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t length = data.shape[0]
    if length == 0:
        return _sip(a, b, NULL, 0)
    return _sip(a, b, &data[0], length)


def siphash24_u64(k0, k1, m):
    """SipHash-2-4 of a single little-endian 64-bit word."""
    return _sip_word(<uint64_t>(k0 & 0xFFFFFFFFFFFFFFFF),
                     <uint64_t>(k1 & 0xFFFFFFFFFFFFFFFF),
                     <uint64_t>(m & 0xFFFFFFFFFFFFFFFF))


def siphash24_u64_array(k0, k1, msgs):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] src = np.ascontiguousarray(msgs, dtype=np.uint64)
    cdef Py_ssize_t n = src.shape[0]
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef uint64_t a = <uint64_t>(k0 & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t b = <uint64_t>(k1 & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _sip_word(a, b, src[i])
    return out


def nearest_key(keys, r):
    """Index of the key closest to r; equal distances go to the larger key."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0]
    if n == 0:
        raise ValueError("no keys")
    cdef uint64_t target = <uint64_t>r
    cdef uint64_t best_d = 0, d
    cdef Py_ssize_t best = -1, i
    for i in range(n):
        d = k[i] - target if k[i] >= target else target - k[i]
        if best < 0 or d < best_d or (d == best_d and k[i] > k[best]):
            best = i
            best_d = d
    return best


def pairwise_common_honest(membership, honest):
    """True iff every pair of rows shares at least one column that is set in both and honest."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] m = np.ascontiguousarray(membership, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] h = np.ascontiguousarray(honest, dtype=np.uint8)
    cdef Py_ssize_t rows = m.shape[0], cols = m.shape[1]
    if h.shape[0] != cols:
        raise ValueError("honest mask length must match membership columns")
    cdef Py_ssize_t i, j, c
    cdef bint found
    cdef bint ok = True
    with nogil:
        for i in range(rows):
            if not ok:
                break
            for j in range(i + 1, rows):
                found = False
                for c in range(cols):
                    if h[c] and m[i, c] and m[j, c]:
                        found = True
                        break
                if not found:
                    ok = False
                    break
    return bool(ok)
