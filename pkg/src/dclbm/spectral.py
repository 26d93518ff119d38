"""Spectral clustering initialization on ``A A^T`` and ``A^T A``.

Follows the Ng-Jordan-Weiss recipe: normalize the similarity by its degrees,
take the top eigenvectors, rescale each row to unit length, then k-means.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from sklearn.cluster import KMeans

from .bigraph import BipartiteGraph
from .model import Posteriors, one_hot

log = logging.getLogger(__name__)

# below this size a dense eigendecomposition is cheaper and exact
DENSE_LIMIT = 200


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralConfig:
    k: int = 2
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    seed: int = 0
    eig_tol: float = 1e-10
    eig_max_iter: int = 10000
    smoothing: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.kmeans_restarts < 1:
            raise ValueError("kmeans_restarts must be at least 1")


class GramOperator(LinearOperator):
    """``B B^T`` for a sparse ``B`` applied without forming the product."""

    def __init__(self, B):
        self.B = sp.csr_matrix(B, dtype=np.float64)
        self.Bt = self.B.T.tocsr()
        n = self.B.shape[0]
        super().__init__(dtype=np.float64, shape=(n, n))

    def _matvec(self, x):
        return self.B @ (self.Bt @ np.ravel(x))

    def _matmat(self, X):
        return self.B @ (self.Bt @ X)

    def _adjoint(self):
        return self

    def toarray(self) -> np.ndarray:
        return (self.B @ self.Bt).toarray()


def gram_similarity(g: BipartiteGraph, side: str = "rows") -> GramOperator:
    """``A A^T`` (rows) or ``A^T A`` (cols) as a matrix-free operator."""
    if side == "rows":
        return GramOperator(g.csr)
    if side == "cols":
        return GramOperator(g.csc.T)
    raise ValueError(f"side must be 'rows' or 'cols', not {side!r}")


def _as_operator(S):
    if isinstance(S, LinearOperator):
        return S
    if sp.issparse(S):
        return sp.csr_matrix(S, dtype=np.float64)
    return np.asarray(S, dtype=np.float64)


def normalized_similarity(S):
    """Return ``(M, active)`` with ``M = D^-1/2 S D^-1/2`` on the non-isolated nodes.

    ``M`` is dense when ``S`` is small or dense, otherwise a linear operator.
    """
    S = _as_operator(S)
    n = S.shape[0]
    deg = np.asarray(S @ np.ones(n)).ravel()
    active = np.flatnonzero(deg > 0)
    inv_root = np.zeros(n)
    inv_root[active] = 1.0 / np.sqrt(deg[active])

    if isinstance(S, np.ndarray) or len(active) <= DENSE_LIMIT:
        dense = S.toarray() if hasattr(S, "toarray") else np.asarray(S @ np.eye(n))
        M = dense[np.ix_(active, active)] * np.outer(inv_root[active], inv_root[active])
        return (M + M.T) / 2.0, active

    def apply(X):
        full = np.zeros((n,) + X.shape[1:])
        full[active] = X * (inv_root[active] if X.ndim == 1 else inv_root[active, None])
        out = S @ full
        out = out[active]
        return out * (inv_root[active] if X.ndim == 1 else inv_root[active, None])

    M = LinearOperator((len(active), len(active)), matvec=apply, matmat=apply, rmatvec=apply, dtype=np.float64)
    return M, active


def top_eigenvectors(M, k: int, *, tol: float = 1e-10, max_iter: int = 10000, seed: int = 0):
    """Eigenvectors of the ``k`` largest eigenvalues of symmetric ``M``."""
    n = M.shape[0]
    if isinstance(M, np.ndarray):
        vals, vecs = np.linalg.eigh(M)
        return vals[::-1][:k], vecs[:, ::-1][:, :k]
    v0 = np.random.default_rng(seed).uniform(-1.0, 1.0, n)
    try:
        vals, vecs = eigsh(M, k=k, which="LA", tol=tol, maxiter=max_iter, v0=v0)
    except ArpackNoConvergence as exc:
        raise EigensolverError(
            f"eigensolver did not converge in {max_iter} iterations "
            f"({len(exc.eigenvalues)} of {k} eigenpairs found)"
        ) from exc
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def embed(S, k: int, cfg: SpectralConfig):
    """Row-normalized top-``k`` eigenvector embedding; returns ``(X, active)``."""
    M, active = normalized_similarity(S)
    if len(active) == 0:
        return np.zeros((0, k)), active
    k_eff = min(k, len(active) - 1) if not isinstance(M, np.ndarray) else min(k, len(active))
    _, X = top_eigenvectors(M, max(k_eff, 1), tol=cfg.eig_tol, max_iter=cfg.eig_max_iter, seed=cfg.seed)
    norms = np.linalg.norm(X, axis=1)
    nz = norms > 0
    X[nz] /= norms[nz, None]
    return X, active


def spectral_cluster(S, cfg: SpectralConfig) -> np.ndarray:
    """0-based labels in ``range(cfg.k)`` for the nodes of similarity ``S``.

    Nodes with zero similarity to everything (isolated) go to cluster 0 and
    are logged; the EM sweeps reassign them later.
    """
    n = S.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    if cfg.k == 1:
        return labels
    X, active = embed(S, cfg.k, cfg)
    if len(active) < n:
        log.info("%d isolated node(s) assigned to cluster 0", n - len(active))
    if len(active) == 0:
        return labels
    if len(active) <= cfg.k:
        labels[active] = np.arange(len(active))
        return labels
    km = KMeans(
        n_clusters=cfg.k,
        init="k-means++",
        n_init=cfg.kmeans_restarts,
        max_iter=cfg.kmeans_max_iter,
        random_state=cfg.seed,
    )
    labels[active] = km.fit_predict(X)
    return labels


def isolated_nodes(S) -> np.ndarray:
    """Indices of nodes whose similarity row sums to zero."""
    S = _as_operator(S)
    deg = np.asarray(S @ np.ones(S.shape[0])).ravel()
    return np.flatnonzero(deg <= 0)


def init_posteriors(g: BipartiteGraph, K: int, L: int, cfg: SpectralConfig = SpectralConfig()) -> Posteriors:
    """Smoothed one-hot posteriors from spectral labels of rows and columns."""
    z, w = spectral_labels(g, K, L, cfg)
    return posteriors_from_labels(z, w, K, L, cfg.smoothing)


def spectral_labels(g: BipartiteGraph, K: int, L: int, cfg: SpectralConfig = SpectralConfig()):
    """The raw ``(z, w)`` spectral labels used by :func:`init_posteriors`."""
    z = spectral_cluster(gram_similarity(g, "rows"), replace(cfg, k=K))
    w = spectral_cluster(gram_similarity(g, "cols"), replace(cfg, k=L))
    return z, w


def posteriors_from_labels(z, w, K: int, L: int, eps: float = 1e-6) -> Posteriors:
    return Posteriors(one_hot(z, K, eps), one_hot(w, L, eps))

