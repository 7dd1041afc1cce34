# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels; mirrors the API of _kernels_py."""

import numpy as np
cimport numpy as cnp

BACKEND = "cython"

cnp.import_array()

ctypedef cnp.complex128_t cplx


cdef inline int _parity64(unsigned long long v) nogil:
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return <int>(v & 1ULL)


def apply_1q(cplx[::1] state, int q, cnp.ndarray[cplx, ndim=2] m):
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t stride = 1 << q
    cdef Py_ssize_t block = stride << 1
    cdef Py_ssize_t base, i, i0, i1
    cdef cplx m00 = m[0, 0], m01 = m[0, 1], m10 = m[1, 0], m11 = m[1, 1]
    cdef cplx a, b
    with nogil:
        base = 0
        while base < dim:
            for i in range(stride):
                i0 = base + i
                i1 = i0 + stride
                a = state[i0]
                b = state[i1]
                state[i0] = m00 * a + m01 * b
                state[i1] = m10 * a + m11 * b
            base += block


def apply_cnot_layer(cplx[::1] state, long[::1] controls, long[::1] targets):
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t k, i
    cdef unsigned long long cbit, tbit
    cdef cplx tmp
    with nogil:
        for k in range(controls.shape[0]):
            cbit = 1ULL << controls[k]
            tbit = 1ULL << targets[k]
            for i in range(dim):
                # visit each swap pair once: control set, target clear
                if (i & cbit) and not (i & tbit):
                    tmp = state[i]
                    state[i] = state[i | tbit]
                    state[i | tbit] = tmp


def apply_pauli(cplx[::1] state, unsigned long long x_mask, unsigned long long z_mask):
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t i
    cdef unsigned long long j
    cdef cplx tmp
    with nogil:
        # Z before X, matching the python fallback bit for bit.
        if z_mask:
            for i in range(dim):
                if _parity64((<unsigned long long>i) & z_mask):
                    state[i] = -state[i]
        if x_mask:
            for i in range(dim):
                j = (<unsigned long long>i) ^ x_mask
                if <unsigned long long>i < j:
                    tmp = state[i]
                    state[i] = state[j]
                    state[j] = tmp
