"""Variational EM for the degree-corrected latent block model.

The degree parameters are fixed at the scaled observed degrees before the
loop starts; the iterations alternate a closed-form update of
``(pi, rho, mu)`` with the factorized posterior updates for rows and then
columns.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from . import kernels
from .bigraph import BipartiteGraph, scaled_degree_params
from .model import MU_CLAMP, BlockParams, Posteriors

log = logging.getLogger(__name__)


class NonFiniteObjectiveError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = 200
    tol: float = 1e-8
    min_pi: float = 1e-10
    mu_clamp: tuple = MU_CLAMP
    track_trace: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.min_pi < 0:
            raise ValueError("min_pi must be non-negative")
        lo, hi = self.mu_clamp
        if not 0 < lo <= hi:
            raise ValueError("mu_clamp must satisfy 0 < lo <= hi")


@dataclass
class FitResult:
    posteriors: Posteriors
    params: BlockParams
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    objective: float
    diagnostics: list = field(default_factory=list)


def _sparse_dot(g: BipartiteGraph, q: np.ndarray) -> np.ndarray:
    """``A @ q`` accumulated in ascending column order per row."""
    return kernels.compressed_dot(*g.row_view(), np.ascontiguousarray(q, dtype=np.float64))


def _log_weighted(weight, param, what):
    """``sum weight * log(param)`` with ``0 log 0 = 0``."""
    weight = np.asarray(weight, dtype=float)
    param = np.asarray(param, dtype=float)
    if ((param <= 0) & (weight > 0)).any():
        raise ValueError(f"log of zero {what} with positive weight")
    return float(xlogy(weight, param).sum())


def _entropy(q):
    return -float(xlogy(q, q).sum())


def _objective(g, p, pi, rho, mu, theta, lam, aq=None):
    qz, qw = p.qz, p.qw
    if aq is None:
        aq = _sparse_dot(g, qw)
    block_counts = qz.T @ aq
    expected = (qz.T @ theta) @ mu @ (qw.T @ lam)
    return (
        -float(expected)
        + _log_weighted(block_counts, mu, "mu")
        + _log_weighted(qz.sum(axis=0), pi, "pi")
        + _log_weighted(qw.sum(axis=0), rho, "rho")
        + _entropy(qz)
        + _entropy(qw)
    )


def objective_full(g: BipartiteGraph, p: Posteriors, params: BlockParams) -> float:
    """The variational lower bound written in terms of ``qz``, ``qw``.

    Excludes the constant ``-sum log(A_ij!)``; uses ``0 log 0 = 0``.
    """
    degree_term = _log_weighted(g.row_degrees, params.theta, "theta") + _log_weighted(
        g.col_degrees, params.lam, "lambda"
    )
    return degree_term + _objective(g, p, params.pi, params.rho, params.mu, params.theta, params.lam)


def objective_hat(g: BipartiteGraph, p: Posteriors, pi, rho, mu, *, degrees=None, aq=None) -> float:
    """Criterion with the degree parameters fixed at the scaled degrees.

    The term ``sum A_ij (log theta_i + log lam_j)`` is dropped since it does
    not change once the degrees are fixed.
    """
    theta, lam = degrees if degrees is not None else scaled_degree_params(g)
    return _objective(g, p, np.asarray(pi), np.asarray(rho), np.asarray(mu), theta, lam, aq=aq)


def _floor_probs(v, floor):
    v = np.maximum(v, floor)
    return v / v.sum()


def m_step(g: BipartiteGraph, p: Posteriors, cfg: FitConfig = FitConfig(), *, degrees=None, notes=None):
    """Closed-form maximizer ``(pi, rho, mu)`` given the posteriors.

    ``mu_kl`` is the soft block edge count over the soft block expected
    count under the fixed degrees. Blocks with a zero denominator get the
    lower clamp; empty clusters are floored at ``cfg.min_pi``. Both events
    are appended to ``notes`` when a list is given.
    """
    theta, lam = degrees if degrees is not None else scaled_degree_params(g)
    qz, qw = p.qz, p.qw
    pi = qz.mean(axis=0)
    rho = qw.mean(axis=0)
    if notes is not None:
        for side, v in (("row", pi), ("column", rho)):
            for k in np.flatnonzero(v <= cfg.min_pi):
                notes.append(f"{side} cluster {k} emptied (weight {v[k]:.3g})")
    pi = _floor_probs(pi, cfg.min_pi)
    rho = _floor_probs(rho, cfg.min_pi)

    num = qz.T @ _sparse_dot(g, qw)
    den = np.outer(qz.T @ theta, qw.T @ lam)
    lo, hi = cfg.mu_clamp
    empty = den <= 0
    mu = np.divide(num, den, out=np.full_like(num, lo), where=~empty)
    if notes is not None:
        for k, l in zip(*np.nonzero(empty)):
            notes.append(f"empty soft block ({k}, {l}); mu set to {lo}")
    return pi, rho, np.clip(mu, lo, hi)


def _estep(view, q_other, scale, other_scale, mu, log_prior, side):
    # cost_k = sum_l mu_kl * t_l with t_l = sum_j lam_j q_jl
    t = q_other.T @ other_scale
    cost = mu @ t
    with np.errstate(divide="ignore"):
        log_mu = np.log(mu)
    q, bad = kernels.estep(
        *view,
        np.ascontiguousarray(q_other, dtype=np.float64),
        np.ascontiguousarray(scale, dtype=np.float64),
        np.ascontiguousarray(cost, dtype=np.float64),
        np.ascontiguousarray(log_mu, dtype=np.float64),
        np.ascontiguousarray(log_prior, dtype=np.float64),
    )
    if bad >= 0:
        raise ValueError(f"{side} {bad} has no admissible cluster")
    return q


def e_step_rows(g: BipartiteGraph, qw, pi, mu, theta, lam) -> np.ndarray:
    """Row posteriors ``qz_ik ∝ exp(g1_i(k))`` given ``qw`` and the parameters."""
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    return _estep(g.row_view(), qw, theta, lam, mu, log_pi, "row")


def e_step_cols(g: BipartiteGraph, qz, rho, mu, theta, lam) -> np.ndarray:
    """Column posteriors ``qw_jl ∝ exp(g2_j(l))``; mirror of :func:`e_step_rows`."""
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore"):
        log_rho = np.log(rho)
    return _estep(g.col_view(), qz, lam, theta, mu.T, log_rho, "column")


def fit(g: BipartiteGraph, K: int, L: int, init: Posteriors, cfg: FitConfig = FitConfig()) -> FitResult:
    """Run variational EM from ``init`` until the criterion stabilizes.

    Each iteration is an M step followed by the row and then the column E
    step. Stops when ``|J_t - J_{t-1}| <= tol (|J_{t-1}| + 1)`` or after
    ``cfg.max_iter`` iterations.
    """
    if init.qz.shape != (g.m, K) or init.qw.shape != (g.n, L):
        raise ValueError(
            f"init shapes {init.qz.shape}, {init.qw.shape} do not match ({g.m}, {K}), ({g.n}, {L})"
        )
    theta, lam = scaled_degree_params(g)
    degrees = (theta, lam)
    qz, qw = init.qz, init.qw
    trace = []
    notes: list = []
    prev = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        p = Posteriors(qz, qw)
        pi, rho, mu = m_step(g, p, cfg, degrees=degrees, notes=notes)
        qz = e_step_rows(g, qw, pi, mu, theta, lam)
        qw = e_step_cols(g, qz, rho, mu, theta, lam)
        cur = objective_hat(g, Posteriors(qz, qw), pi, rho, mu, degrees=degrees)
        if not np.isfinite(cur):
            raise NonFiniteObjectiveError(
                f"objective became {cur} at iteration {it}; last finite value {prev}"
            )
        trace.append(cur)
        if prev is not None and abs(cur - prev) <= cfg.tol * (abs(prev) + 1.0):
            converged = True
            break
        prev = cur

    for msg in dict.fromkeys(notes):
        log.debug(msg)
    params = BlockParams(pi, rho, theta, lam, mu)
    return FitResult(
        posteriors=Posteriors(qz, qw),
        params=params,
        objective_trace=np.asarray(trace if cfg.track_trace else trace[-1:]),
        iterations=it,
        converged=converged,
        objective=trace[-1],
        diagnostics=list(dict.fromkeys(notes)),
    )
