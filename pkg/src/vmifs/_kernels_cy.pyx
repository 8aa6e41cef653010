# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same contracts as ``_kernels_py``."""

import numpy as np
from cython.parallel import prange
from libc.math cimport exp, log, sqrt, M_PI, INFINITY
from libc.stdint cimport int64_t

NAME = "cython"


def gauss_kde(const double[:, ::1] query, const double[:, ::1] samples,
              const double[::1] weights, const double[::1] bandwidth, int workers=1):
    cdef Py_ssize_t n = query.shape[0], m = samples.shape[0], dims = query.shape[1]
    cdef Py_ssize_t q, j, t
    cdef double acc, z, u, norm = 0.0
    cdef double[::1] inv_h = np.empty(dims)
    out = np.empty(n)
    cdef double[::1] o = out
    for j in range(m):
        norm += weights[j]
    for t in range(dims):
        inv_h[t] = 1.0 / bandwidth[t]
        norm *= bandwidth[t] * sqrt(2.0 * M_PI)
    for q in prange(n, nogil=True, num_threads=max(workers, 1), schedule="static"):
        acc = 0.0
        for j in range(m):
            z = 0.0
            for t in range(dims):
                u = (query[q, t] - samples[j, t]) * inv_h[t]
                z = z + u * u
            acc = acc + weights[j] * exp(-0.5 * z)
        o[q] = acc / norm
    return out


def score_candidates(const double[:, ::1] logq, const double[:, :, ::1] logc,
                     const int64_t[::1] candidates, const double[::1] log_prior,
                     const int64_t[::1] labels, const double[::1] weights,
                     int workers=1):
    cdef Py_ssize_t K = candidates.shape[0], N = logq.shape[0], L = logq.shape[1]
    cdef Py_ssize_t ci, i, k, c, y
    cdef double acc, mx, s, a
    out = np.empty(K)
    cdef double[::1] o = out
    for ci in prange(K, nogil=True, num_threads=max(workers, 1), schedule="static"):
        i = candidates[ci]
        acc = 0.0
        for k in range(N):
            mx = -INFINITY
            for c in range(L):
                a = log_prior[c] + logq[k, c] + logc[i, k, c]
                if a > mx:
                    mx = a
            s = 0.0
            for c in range(L):
                s = s + exp(log_prior[c] + logq[k, c] + logc[i, k, c] - mx)
            y = labels[k]
            acc = acc + weights[k] * (logq[k, y] + logc[i, k, y] - (mx + log(s)))
        o[ci] = acc
    return out
