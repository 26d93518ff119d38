"""Numpy fallback with the same signatures as the compiled ``_kernels``."""
import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp


def _as_csr(indptr, indices, data, ncols):
    return sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, ncols))


def compressed_dot(indptr, indices, data, q):
    q = np.asarray(q, dtype=np.float64)
    A = _as_csr(indptr, indices, data, q.shape[0])
    return np.asarray(A @ q)


def estep(indptr, indices, data, q_other, scale, cost, log_mu, log_prior):
    s = compressed_dot(indptr, indices, data, q_other)
    g = -np.outer(scale, cost) + s @ np.asarray(log_mu).T + np.asarray(log_prior)
    dead = np.all(np.isneginf(g), axis=1)
    bad = int(np.argmax(dead)) if dead.any() else -1
    g[dead] = 0.0
    q = np.exp(g - logsumexp(g, axis=1, keepdims=True))
    return q, bad
