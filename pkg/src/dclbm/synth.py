"""Synthetic DC-LBM networks with known labels and degree parameters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .bigraph import BipartiteGraph

DESIGN_MU = np.array(
    [
        [0.15, 0.05, 0.05, 0.06],
        [0.05, 0.15, 0.05, 0.08],
        [0.05, 0.05, 0.15, 0.10],
    ]
)

# spawn keys of the independent random streams of one instance
_LABELS, _DEGREES, _ENTRIES = 0, 1, 2


def design_mu(r: float) -> np.ndarray:
    """The 3 x 4 block-rate matrix of the simulation design, scaled by ``r``."""
    if not r > 0:
        raise ValueError("density factor r must be positive")
    return r * DESIGN_MU


@dataclass(frozen=True)
class SynthConfig:
    """Generative design.

    ``theta_dist`` and ``lambda_dist`` are ``("constant", c)`` or
    ``("uniform", lo, hi)``.
    """

    m: int
    n: int
    pi: np.ndarray
    rho: np.ndarray
    mu_base: np.ndarray
    theta_dist: tuple = ("uniform", 0.5, 1.5)
    lambda_dist: tuple = ("uniform", 0.5, 1.5)
    r: float = 1.0
    seed: int = 0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        mu = np.asarray(self.mu_base, dtype=float)
        for name, v in (("pi", pi), ("rho", rho)):
            if (v < 0).any() or not np.isclose(v.sum(), 1.0):
                raise ValueError(f"{name} must be a probability vector")
        if mu.shape != (len(pi), len(rho)) or not (mu > 0).all():
            raise ValueError("mu_base must be a positive K x L matrix")
        if not self.r > 0:
            raise ValueError("r must be positive")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mu_base", mu)

    @property
    def K(self) -> int:
        return len(self.pi)

    @property
    def L(self) -> int:
        return len(self.rho)

    @property
    def mu(self) -> np.ndarray:
        return self.r * self.mu_base


def simulation_design(r: float = 1.0, *, classical: bool = False, seed: int = 0, m: int = 800, n: int = 1000) -> SynthConfig:
    """The simulation design: K=3, L=4, uniform priors, Uniform(0.5, 1.5) degrees.

    ``classical=True`` fixes all degree parameters at one.
    """
    law = ("constant", 1.0) if classical else ("uniform", 0.5, 1.5)
    return SynthConfig(
        m=m, n=n, pi=np.full(3, 1 / 3), rho=np.full(4, 1 / 4), mu_base=DESIGN_MU,
        theta_dist=law, lambda_dist=law, r=r, seed=seed,
    )


class Sample(NamedTuple):
    graph: BipartiteGraph
    z: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    lam: np.ndarray


def _stream(seed, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _draw_degrees(rng, law, size):
    kind = law[0]
    if kind == "constant":
        return np.full(size, float(law[1]))
    if kind == "uniform":
        return rng.uniform(law[1], law[2], size)
    raise ValueError(f"unknown degree law {kind!r}")


def expected_rates(z, w, theta, lam, mu) -> np.ndarray:
    """Dense matrix of conditional means ``theta_i lam_j mu_{z_i w_j}``."""
    return np.outer(theta, lam) * np.asarray(mu)[np.ix_(z, w)]


def sample_entries(z, w, theta, lam, mu, seed) -> BipartiteGraph:
    """Poisson counts for fixed labels and degree parameters.

    Every row has its own random stream keyed by ``(seed, row)``, so the
    draw does not depend on generation order.
    """
    mu = np.asarray(mu, dtype=float)
    indptr = [0]
    indices, data = [], []
    for i in range(len(z)):
        counts = _stream(seed, _ENTRIES, i).poisson(theta[i] * lam * mu[z[i], w])
        nz = np.flatnonzero(counts)
        indices.append(nz)
        data.append(counts[nz])
        indptr.append(indptr[-1] + len(nz))
    A = sp.csr_matrix(
        (np.concatenate(data), np.concatenate(indices), np.asarray(indptr)),
        shape=(len(z), len(w)),
    )
    return BipartiteGraph.from_sparse(A)


def sample(cfg: SynthConfig) -> Sample:
    """Draw labels, degree parameters and a Poisson count matrix."""
    rng = _stream(cfg.seed, _LABELS)
    z = rng.choice(cfg.K, size=cfg.m, p=cfg.pi)
    w = rng.choice(cfg.L, size=cfg.n, p=cfg.rho)
    rng = _stream(cfg.seed, _DEGREES)
    theta = _draw_degrees(rng, cfg.theta_dist, cfg.m)
    lam = _draw_degrees(rng, cfg.lambda_dist, cfg.n)
    return Sample(sample_entries(z, w, theta, lam, cfg.mu, cfg.seed), z, w, theta, lam)
