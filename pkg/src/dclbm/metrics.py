"""Clustering metrics and the quantities used to study consistency."""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaincc, xlogy

from .model import one_hot

EXHAUSTIVE_ALIGN_LIMIT = 8


def _as_matrix(p, k=None):
    p = np.asarray(p)
    if p.ndim == 1:
        return one_hot(p, int(p.max()) + 1 if k is None else k)
    return p.astype(float)


def soft_confusion(p, p_tilde) -> np.ndarray:
    """``R_kk' = (1/m) sum_i p_ik p~_ik'`` for two membership matrices."""
    p = np.asarray(p, dtype=float)
    p_tilde = np.asarray(p_tilde, dtype=float)
    if p.shape[0] != p_tilde.shape[0]:
        raise ValueError(f"row count mismatch: {p.shape[0]} vs {p_tilde.shape[0]}")
    return p.T @ p_tilde / p.shape[0]


def partition_distance(p, p_tilde) -> float:
    """``1 - trace(R(p, p~))``."""
    p = np.asarray(p, dtype=float)
    p_tilde = np.asarray(p_tilde, dtype=float)
    if p.shape != p_tilde.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {p_tilde.shape}")
    return 1.0 - float(np.trace(soft_confusion(p, p_tilde)))


def triple_distance(a, b) -> float:
    """Distance between ``(qz, qw, mu)`` triples: two partition distances plus L1 on mu."""
    (qz, qw, mu), (qz2, qw2, mu2) = a, b
    mu, mu2 = np.asarray(mu, dtype=float), np.asarray(mu2, dtype=float)
    if mu.shape != mu2.shape:
        raise ValueError("mu shapes differ")
    return partition_distance(qz, qz2) + partition_distance(qw, qw2) + float(np.abs(mu - mu2).sum())


def kl_poisson(a, b):
    """Poisson divergence ``a log(a/b) - (a - b)``; broadcasts."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if (a <= 0).any() or (b <= 0).any():
        raise ValueError("kl_poisson needs positive rates")
    out = xlogy(a, a / b) - (a - b)
    return float(out) if out.ndim == 0 else out


def separation_G(z_true, w_true, qz, qw, mu_true, mu) -> float:
    """Confusion-weighted Poisson divergence between true and candidate rates."""
    mu_true = np.asarray(mu_true, dtype=float)
    mu = np.asarray(mu, dtype=float)
    qz = np.asarray(qz, dtype=float)
    qw = np.asarray(qw, dtype=float)
    K, L = mu_true.shape
    if mu.shape != (qz.shape[1], qw.shape[1]):
        raise ValueError("mu does not match the posterior widths")
    Rz = soft_confusion(one_hot(z_true, K), qz)
    Rw = soft_confusion(one_hot(w_true, L), qw)
    kl = kl_poisson(mu_true[:, :, None, None], mu[None, None, :, :])
    return float(np.einsum("ka,lb,klab->", Rz, Rw, kl))


def population_objective(z_true, w_true, theta_true, lam_true, rates, qz, qw, mu) -> float:
    """Noise-free criterion with canonical degrees and the exact rate matrix."""
    rates = np.asarray(rates, dtype=float)
    mu = np.asarray(mu, dtype=float)
    qz = np.asarray(qz, dtype=float)
    qw = np.asarray(qw, dtype=float)
    if rates.shape != (len(z_true), len(w_true)) or rates.shape != (qz.shape[0], qw.shape[0]):
        raise ValueError("dimension mismatch")
    if (mu <= 0).any():
        raise ValueError("mu must be positive")
    expected = (qz.T @ np.asarray(theta_true)) @ mu @ (qw.T @ np.asarray(lam_true))
    block_rates = qz.T @ rates @ qw
    return float(-expected + (block_rates * np.log(mu)).sum())


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index from the contingency table.

    When the index cannot be normalized (both partitions trivial in the same
    way) it is 1 for identical partitions and 0 otherwise.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty labelings")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    table = np.bincount(ai * kb + bi, minlength=ka * kb).reshape(ka, kb).astype(float)
    index = _comb2(table).sum()
    row = _comb2(table.sum(axis=1)).sum()
    col = _comb2(table.sum(axis=0)).sum()
    pairs = _comb2(a.size)
    expected = row * col / pairs if pairs else 0.0
    max_index = (row + col) / 2
    if max_index - expected == 0:
        same = table.shape[0] == table.shape[1] and np.count_nonzero(table) == table.shape[0]
        return 1.0 if same else 0.0
    return float((index - expected) / (max_index - expected))


def chi_square_independence(table):
    """Pearson chi-square test of independence, without continuity correction.

    Returns ``(statistic, dof, p_value)``.
    """
    obs = np.asarray(table, dtype=float)
    if obs.ndim != 2:
        raise ValueError("table must be 2-d")
    rows = obs.sum(axis=1)
    cols = obs.sum(axis=0)
    if (rows <= 0).any() or (cols <= 0).any():
        raise ValueError("contingency table has a zero margin")
    exp = np.outer(rows, cols) / obs.sum()
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    p = float(gammaincc(dof / 2, stat / 2)) if dof > 0 else 1.0
    return stat, dof, p


def align_labels(reference, candidate, k=None) -> np.ndarray:
    """Permutation ``s`` maximizing ``sum_k R[s[k], k]`` with ``R = R(reference, candidate)``.

    ``s[k]`` is the reference cluster matched to candidate cluster ``k``.
    ``candidate`` may be labels or a membership matrix. Exhaustive search up
    to eight clusters (first maximizer in lexicographic order), Hungarian
    assignment beyond.
    """
    reference = np.asarray(reference)
    cand = np.asarray(candidate)
    K = cand.shape[1] if cand.ndim == 2 else int(max(reference.max(), cand.max())) + 1
    if k is not None:
        K = k
    if cand.ndim == 2 and reference.max() >= K:
        raise ValueError("cluster count mismatch")
    R = soft_confusion(one_hot(reference, K), _as_matrix(cand, K))
    if K > EXHAUSTIVE_ALIGN_LIMIT:
        rows, cols = linear_sum_assignment(R, maximize=True)
        perm = np.empty(K, dtype=np.int64)
        perm[cols] = rows
        return perm
    perms = np.array(list(itertools.permutations(range(K))), dtype=np.int64)
    scores = R[perms, np.arange(K)].sum(axis=1)
    return perms[int(np.argmax(scores))]


def aligned_l1_error(reference, q) -> float:
    """``min_s (1/m) sum_i sum_k |q_ik - 1(reference_i = s(k))|``."""
    q = np.asarray(q, dtype=float)
    perm = align_labels(reference, q)
    target = one_hot(reference, q.shape[1])[:, perm]
    return float(np.abs(q - target).sum(axis=1).mean())
