# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Schur-complement kernel; same contract as ``_schur_py.schur_accumulate``."""

import numpy as np
from libc.stdint cimport int64_t


def schur_accumulate(double[:, ::1] M, const double[:, :, ::1] W, const double[:, :, ::1] mats,
                     const int64_t[::1] offsets, const int64_t[::1] rows):
    cdef Py_ssize_t nb = offsets.shape[0] - 1
    cdef Py_ssize_t k = W.shape[1]
    cdef Py_ssize_t b, i, j, p, q, l, lo, hi, maxr = 0
    cdef int64_t ri, rj
    cdef double acc, a
    for b in range(nb):
        if offsets[b + 1] - offsets[b] > maxr:
            maxr = offsets[b + 1] - offsets[b]
    if maxr == 0:
        return
    cdef double[:, ::1] T = np.empty((k, k))
    cdef double[:, :, ::1] B = np.empty((maxr, k, k))
    for b in range(nb):
        lo = offsets[b]
        hi = offsets[b + 1]
        for j in range(lo, hi):
            # T = A_j W, skipping structural zeros of A_j
            for p in range(k):
                for q in range(k):
                    T[p, q] = 0.0
                for l in range(k):
                    a = mats[j, p, l]
                    if a != 0.0:
                        for q in range(k):
                            T[p, q] += a * W[b, l, q]
            # B_j = W T, symmetric
            for p in range(k):
                for q in range(p, k):
                    acc = 0.0
                    for l in range(k):
                        acc += W[b, p, l] * T[l, q]
                    B[j - lo, p, q] = acc
                    B[j - lo, q, p] = acc
        for i in range(lo, hi):
            ri = rows[i]
            for j in range(i, hi):
                acc = 0.0
                for p in range(k):
                    for q in range(k):
                        a = mats[i, p, q]
                        if a != 0.0:
                            acc += a * B[j - lo, p, q]
                rj = rows[j]
                M[ri, rj] += acc
                if ri != rj:
                    M[rj, ri] += acc
