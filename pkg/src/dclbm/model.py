"""Parameter and posterior containers, likelihoods, and canonical form.

Labels are 0-based everywhere inside the package; the CLI converts to and
from the 1-based numbering used in files.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .bigraph import BipartiteGraph

MU_CLAMP = (1e-10, 1e10)
ENUMERATION_LIMIT = 10**7


@dataclass(frozen=True)
class BlockParams:
    """The parameter bundle ``(pi, rho, theta, lam, mu)``."""

    pi: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    @property
    def K(self) -> int:
        return len(self.pi)

    @property
    def L(self) -> int:
        return len(self.rho)

    def rescaled(self, c1: float, c2: float) -> "BlockParams":
        """Member of the equivalence family ``(e^c1 theta, e^c2 lam, e^-(c1+c2) mu)``."""
        return BlockParams(
            self.pi,
            self.rho,
            np.exp(c1) * self.theta,
            np.exp(c2) * self.lam,
            np.exp(-c1 - c2) * self.mu,
        )


@dataclass(frozen=True)
class Posteriors:
    """Row-stochastic membership matrices ``qz`` (m x K) and ``qw`` (n x L)."""

    qz: np.ndarray
    qw: np.ndarray

    def __post_init__(self):
        for name in ("qz", "qw"):
            q = np.asarray(getattr(self, name), dtype=np.float64)
            if q.ndim != 2:
                raise ValueError(f"{name} must be a 2-d array")
            if (q < 0).any() or not np.allclose(q.sum(axis=1), 1.0, rtol=0, atol=1e-12):
                raise ValueError(f"{name} rows must be non-negative and sum to 1")
            object.__setattr__(self, name, np.ascontiguousarray(q))

    @property
    def K(self) -> int:
        return self.qz.shape[1]

    @property
    def L(self) -> int:
        return self.qw.shape[1]


def one_hot(labels, k: int, eps: float = 0.0) -> np.ndarray:
    """One-hot encode 0-based ``labels``; ``eps`` gives ``(1 - k eps) onehot + eps``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"label outside 0..{k - 1}")
    q = np.zeros((labels.size, k))
    q[np.arange(labels.size), labels] = 1.0
    if eps:
        if eps * k >= 1:
            raise ValueError("smoothing too large for the number of clusters")
        q = (1.0 - eps * k) * q + eps
    return q


def hard_labels(p: Posteriors):
    """Row-wise argmax of ``qz`` and ``qw``; ties go to the smallest index."""
    return np.argmax(p.qz, axis=1), np.argmax(p.qw, axis=1)


def log_factorial_sum(g: BipartiteGraph) -> float:
    """``sum_ij log(A_ij!)``, evaluating log-gamma once per distinct count."""
    data = g.csr.data
    if data.size == 0:
        return 0.0
    values, counts = np.unique(data, return_counts=True)
    return float(np.dot(gammaln(values + 1.0), counts))


def _check_labels(z, w, g, params):
    z = np.asarray(z, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    if z.shape != (g.m,) or w.shape != (g.n,):
        raise ValueError("label vectors do not match the graph dimensions")
    if z.min() < 0 or z.max() >= params.K or w.min() < 0 or w.max() >= params.L:
        raise ValueError("label out of range")
    return z, w


def complete_log_likelihood(g: BipartiteGraph, z, w, params: BlockParams) -> float:
    """``log P(z, w, A; params)`` for hard labels ``z``, ``w``."""
    z, w = _check_labels(z, w, g, params)
    theta = np.asarray(params.theta, dtype=float)
    lam = np.asarray(params.lam, dtype=float)
    mu = np.asarray(params.mu, dtype=float)
    K, L = mu.shape
    # sum_ij theta_i lam_j mu_{z_i w_j} through block sums of theta and lam
    tz = np.bincount(z, weights=theta, minlength=K)
    lw = np.bincount(w, weights=lam, minlength=L)
    expected = tz @ mu @ lw

    coo = g.csr.tocoo()
    rates = theta[coo.row] * lam[coo.col] * mu[z[coo.row], w[coo.col]]
    if (rates <= 0).any():
        raise ValueError("zero rate with positive count")
    counts = coo.data.astype(float)
    ll = float(np.dot(counts, np.log(rates))) - expected - log_factorial_sum(g)
    with np.errstate(divide="ignore"):
        ll += float(np.log(params.pi)[z].sum() + np.log(params.rho)[w].sum())
    return ll


def marginal_log_likelihood_bruteforce(g: BipartiteGraph, params: BlockParams) -> float:
    """``log sum_{z,w} P(z, w, A)`` by full enumeration of both label spaces.

    Only for tiny instances; refuses when ``K^m L^n`` exceeds ``10**7``.
    """
    K, L = params.K, params.L
    if float(K) ** g.m * float(L) ** g.n > ENUMERATION_LIMIT:
        raise ValueError(
            f"enumeration too large: K^m * L^n = {K}^{g.m} * {L}^{g.n} exceeds {ENUMERATION_LIMIT}"
        )
    A = g.toarray().astype(float)
    theta = np.asarray(params.theta, dtype=float)
    lam = np.asarray(params.lam, dtype=float)
    mu = np.asarray(params.mu, dtype=float)
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi)
        log_rho = np.log(params.rho)

    # rate[i, j, k, l] = theta_i lam_j mu_kl ; cell[i, j, k, l] = log Poisson mass
    rate = theta[:, None, None, None] * lam[None, :, None, None] * mu[None, None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cell = -rate + xlogy(A[:, :, None, None], rate) - gammaln(A + 1.0)[:, :, None, None]

    all_w = np.array(list(itertools.product(range(L), repeat=g.n)), dtype=np.int64).reshape(-1, g.n)
    prior_w = log_rho[all_w].sum(axis=1)
    cols = np.arange(g.n)
    terms = []
    for z in itertools.product(range(K), repeat=g.m):
        z = np.asarray(z, dtype=np.int64)
        # per (j, l): sum_i cell[i, j, z_i, l]
        per_col = cell[np.arange(g.m), :, z, :].sum(axis=0)
        ll_w = per_col[cols, all_w].sum(axis=1)
        terms.append(log_pi[z].sum() + prior_w + ll_w)
    return float(logsumexp(np.concatenate(terms)))


def canonicalize(z, w, rates, rtol: float = 1e-9):
    """Canonical ``(theta*, lam*, mu*)`` of a block-rank-one rate matrix.

    ``theta*_i`` is the row mean of the rates over the square root of the
    grand mean (``lam*`` likewise); ``mu*`` is the rate divided by
    ``theta*_i lam*_j``, which must be constant on every block.

    Raises
    ------
    ValueError
        If a cluster is empty or the rates are not constant per block up to
        ``rtol`` ("rates not block-rank-one").
    """
    rates = np.asarray(rates, dtype=float)
    z = np.asarray(z, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    m, n = rates.shape
    if z.shape != (m,) or w.shape != (n,):
        raise ValueError("labels do not match the rate matrix")
    K, L = int(z.max()) + 1, int(w.max()) + 1
    if np.bincount(z, minlength=K).min() == 0 or np.bincount(w, minlength=L).min() == 0:
        raise ValueError("every cluster must be non-empty")
    row_mean = rates.mean(axis=1)
    col_mean = rates.mean(axis=0)
    if (row_mean <= 0).any() or (col_mean <= 0).any():
        raise ValueError("rates must be positive on average per row and column")
    root = np.sqrt(rates.mean())
    theta = row_mean / root
    lam = col_mean / root
    ratio = rates / np.outer(theta, lam)

    mu = np.empty((K, L))
    for k in range(K):
        for l in range(L):
            block = ratio[np.ix_(z == k, w == l)]
            mu[k, l] = block[0, 0]
            if not np.allclose(block, mu[k, l], rtol=rtol, atol=0):
                raise ValueError("rates not block-rank-one")
    return theta, lam, mu
