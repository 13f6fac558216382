# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled statevector kernels.

Contract is identical to entopt._kernels_py (LSB qubit ordering, in-place
gate application, 4x4 matrices indexed by 2*bit_first + bit_second); that
module is the executable specification for these loops.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long x) nogil


cdef inline Py_ssize_t _insert_zero(Py_ssize_t x, int p) nogil:
    # Widen x by one bit, placing a 0 at bit position p.
    return ((x >> p) << (p + 1)) | (x & (((<Py_ssize_t>1) << p) - 1))


def apply_1q(cnp.complex128_t[::1] state, cnp.complex128_t[:, :] mat, int q):
    cdef Py_ssize_t half = state.shape[0] >> 1
    cdef Py_ssize_t bit = (<Py_ssize_t>1) << q
    cdef double complex m00 = mat[0, 0], m01 = mat[0, 1]
    cdef double complex m10 = mat[1, 0], m11 = mat[1, 1]
    cdef Py_ssize_t g, i0, i1
    cdef double complex a, b
    with nogil:
        for g in range(half):
            i0 = _insert_zero(g, q)
            i1 = i0 | bit
            a = state[i0]
            b = state[i1]
            state[i0] = m00 * a + m01 * b
            state[i1] = m10 * a + m11 * b


def apply_2q(cnp.complex128_t[::1] state, cnp.complex128_t[:, :] mat, int qa, int qb):
    cdef Py_ssize_t quarter = state.shape[0] >> 2
    cdef int lo = qa if qa < qb else qb
    cdef int hi = qb if qa < qb else qa
    cdef Py_ssize_t bita = (<Py_ssize_t>1) << qa
    cdef Py_ssize_t bitb = (<Py_ssize_t>1) << qb
    cdef double complex m[4][4]
    cdef int r, c
    for r in range(4):
        for c in range(4):
            m[r][c] = mat[r, c]
    cdef Py_ssize_t g, base, i1, i2, i3
    cdef double complex v0, v1, v2, v3
    with nogil:
        for g in range(quarter):
            base = _insert_zero(_insert_zero(g, lo), hi)
            i1 = base | bitb            # pair index 1: bit_a=0, bit_b=1
            i2 = base | bita            # pair index 2: bit_a=1, bit_b=0
            i3 = base | bita | bitb     # pair index 3
            v0 = state[base]
            v1 = state[i1]
            v2 = state[i2]
            v3 = state[i3]
            state[base] = m[0][0] * v0 + m[0][1] * v1 + m[0][2] * v2 + m[0][3] * v3
            state[i1] = m[1][0] * v0 + m[1][1] * v1 + m[1][2] * v2 + m[1][3] * v3
            state[i2] = m[2][0] * v0 + m[2][1] * v1 + m[2][2] * v2 + m[2][3] * v3
            state[i3] = m[3][0] * v0 + m[3][1] * v1 + m[3][2] * v2 + m[3][3] * v3


def qubit_marginals(cnp.complex128_t[::1] state):
    """Single-qubit reduced density matrices: (n, 2, 2) complex array."""
    cdef Py_ssize_t size = state.shape[0]
    cdef int n = 0
    cdef Py_ssize_t tmp = size
    while tmp > 1:
        tmp >>= 1
        n += 1
    out = np.empty((n, 2, 2), dtype=np.complex128)
    cdef cnp.complex128_t[:, :, ::1] o = out
    cdef Py_ssize_t half = size >> 1
    cdef int q
    cdef Py_ssize_t g, i0, i1
    cdef double complex a, b, coh
    cdef double p0, p1
    with nogil:
        for q in range(n):
            p0 = 0.0
            p1 = 0.0
            coh = 0.0
            for g in range(half):
                i0 = _insert_zero(g, q)
                i1 = i0 | ((<Py_ssize_t>1) << q)
                a = state[i0]
                b = state[i1]
                p0 += a.real * a.real + a.imag * a.imag
                p1 += b.real * b.real + b.imag * b.imag
                coh += a * b.conjugate()
            o[q, 0, 0] = p0
            o[q, 0, 1] = coh
            o[q, 1, 0] = coh.conjugate()
            o[q, 1, 1] = p1
    return out


def zgen_moments(cnp.complex128_t[::1] state):
    """(<G>, <G^2>) for the collective generator G = sum_j Z_j / 2."""
    cdef Py_ssize_t size = state.shape[0]
    cdef int n = 0
    cdef Py_ssize_t tmp = size
    while tmp > 1:
        tmp >>= 1
        n += 1
    cdef Py_ssize_t k
    cdef double p, w, m1 = 0.0, m2 = 0.0
    cdef double complex z
    with nogil:
        for k in range(size):
            z = state[k]
            p = z.real * z.real + z.imag * z.imag
            w = 0.5 * (n - 2.0 * __builtin_popcountll(<unsigned long long>k))
            m1 += p * w
            m2 += p * w * w
    return m1, m2
