# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the variational EM sweeps.

Both routines walk a compressed sparse matrix (CSR for the row sweep, CSC
for the column sweep) and accumulate in ascending index order, matching
the order used by ``scipy.sparse`` so the two backends agree closely.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


def compressed_dot(const cnp.int64_t[::1] indptr,
                   const cnp.int64_t[::1] indices,
                   const double[::1] data,
                   const double[:, ::1] q):
    """Return ``A @ q`` for a compressed sparse ``A`` given by its arrays."""
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    cdef Py_ssize_t ncols = q.shape[1]
    cdef Py_ssize_t i, c, p, j
    cdef double a
    out = np.zeros((nrows, ncols), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(nrows):
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                a = data[p]
                for c in range(ncols):
                    o[i, c] += a * q[j, c]
    return out


def estep(const cnp.int64_t[::1] indptr,
          const cnp.int64_t[::1] indices,
          const double[::1] data,
          const double[:, ::1] q_other,
          const double[::1] scale,
          const double[::1] cost,
          const double[:, ::1] log_mu,
          const double[::1] log_prior):
    """Fused score + softmax for one side of the E step.

    Returns ``(q, bad)`` where ``bad`` is the first row whose scores are all
    ``-inf`` (or -1 when every row is admissible).
    """
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    cdef Py_ssize_t K = log_mu.shape[0]
    cdef Py_ssize_t L = log_mu.shape[1]
    cdef Py_ssize_t i, k, l, p, j
    cdef Py_ssize_t bad = -1
    cdef double a, g, gmax, total
    out = np.empty((nrows, K), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] s = np.empty(L, dtype=np.float64)
    with nogil:
        for i in range(nrows):
            for l in range(L):
                s[l] = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                a = data[p]
                for l in range(L):
                    s[l] += a * q_other[j, l]
            gmax = -INFINITY
            for k in range(K):
                g = -scale[i] * cost[k]
                for l in range(L):
                    g += s[l] * log_mu[k, l]
                g += log_prior[k]
                o[i, k] = g
                if g > gmax:
                    gmax = g
            if gmax == -INFINITY:
                if bad < 0:
                    bad = i
                continue
            total = 0.0
            for k in range(K):
                o[i, k] = exp(o[i, k] - gmax)
                total += o[i, k]
            for k in range(K):
                o[i, k] /= total
    return out, bad
