import numpy as np
import pytest
from scipy.special import logsumexp

from dclbm import kernels

from conftest import random_graph


def dense_estep(A, q_other, scale, cost, log_mu, log_prior):
    g = -np.outer(scale, cost) + (A @ q_other) @ log_mu.T + log_prior
    return np.exp(g - logsumexp(g, axis=1, keepdims=True))


@pytest.mark.parametrize("shape", [(1, 1), (7, 5), (30, 41)])
def test_compressed_dot_matches_dense(rng, backend, shape):
    g = random_graph(rng, *shape, rate=0.7)
    q = rng.random((shape[1], 3))
    out = kernels.compressed_dot(*g.row_view(), q)
    np.testing.assert_allclose(out, g.toarray() @ q, rtol=1e-13)
    out = kernels.compressed_dot(*g.col_view(), rng.random((shape[0], 2)))
    assert out.shape == (shape[1], 2)


def test_estep_matches_dense(rng, backend):
    g = random_graph(rng, 12, 9, 1.1)
    qw = rng.dirichlet(np.ones(3), 9)
    scale = rng.uniform(0.5, 1.5, 12)
    cost = rng.uniform(0.1, 2.0, 4)
    log_mu = np.log(rng.uniform(0.2, 3.0, (4, 3)))
    log_prior = np.log(rng.dirichlet(np.ones(4)))
    out, bad = kernels.estep(*g.row_view(), qw, scale, cost, log_mu, log_prior)
    assert bad == -1
    np.testing.assert_allclose(out, dense_estep(g.toarray(), qw, scale, cost, log_mu, log_prior), rtol=1e-12)


def test_estep_reports_dead_row(backend):
    g = random_graph(np.random.default_rng(0), 3, 3, 1.0)
    _, bad = kernels.estep(*g.row_view(), np.full((3, 1), 1.0), np.ones(3), np.ones(2), np.zeros((2, 1)),
                           np.array([-np.inf, -np.inf]))
    assert bad == 0


def test_backends_agree(rng):
    try:
        fast = kernels.get_backend("cython")
    except ImportError:
        pytest.skip("compiled kernels not built")
    slow = kernels.get_backend("python")
    g = random_graph(rng, 50, 60, 0.3)
    q = rng.dirichlet(np.ones(4), 60)
    np.testing.assert_allclose(fast.compressed_dot(*g.row_view(), q), slow.compressed_dot(*g.row_view(), q), rtol=1e-13)
    args = (q, rng.random(50), rng.random(3), np.log(rng.uniform(0.1, 2, (3, 4))), np.log(np.full(3, 1 / 3)))
    a, _ = fast.estep(*g.row_view(), *args)
    b, _ = slow.estep(*g.row_view(), *args)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
