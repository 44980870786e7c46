# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython fill kernels for the seeded xoshiro256++ stream.

Must stay bit-identical to mcnc._rngfill_py; the test suite compares the
two backends draw for draw.
"""
from libc.math cimport cos, log, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef unsigned long long u64

cdef double TWO_PI = 6.283185307179586476925286766559
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline u64 rotl(u64 x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline u64 next_u64(u64 *s) nogil:
    cdef u64 result = rotl(s[0] + s[3], 23) + s[0]
    cdef u64 t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = rotl(s[3], 45)
    return result


def u64_fill(cnp.uint64_t[:] state, cnp.uint64_t[:] out):
    cdef u64 s[4]
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(4):
        s[i] = state[i]
    with nogil:
        for i in range(n):
            out[i] = next_u64(s)
    for i in range(4):
        state[i] = s[i]


def uniform_fill(cnp.uint64_t[:] state, double[:] out):
    cdef u64 s[4]
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(4):
        s[i] = state[i]
    with nogil:
        for i in range(n):
            out[i] = <double> (next_u64(s) >> 11) * INV_2_53
    for i in range(4):
        state[i] = s[i]


def normal_fill(cnp.uint64_t[:] state, double[:] out):
    cdef u64 s[4]
    cdef Py_ssize_t i = 0, n = out.shape[0]
    cdef double u1, u2, r
    for i in range(4):
        s[i] = state[i]
    i = 0
    with nogil:
        while i < n:
            u1 = <double> (next_u64(s) >> 11) * INV_2_53
            u2 = <double> (next_u64(s) >> 11) * INV_2_53
            r = sqrt(-2.0 * log(1.0 - u1))
            out[i] = r * cos(TWO_PI * u2)
            if i + 1 < n:
                out[i + 1] = r * sin(TWO_PI * u2)
            i += 2
    for i in range(4):
        state[i] = s[i]
