import numpy as np
import pytest

from dclbm import kernels
from dclbm.bigraph import BipartiteGraph
from dclbm.model import BlockParams, Posteriors


def random_graph(rng, m, n, rate=1.0):
    A = rng.poisson(rate, size=(m, n))
    if A.sum() == 0:
        A[0, 0] = 1
    return BipartiteGraph.from_sparse(A)


def random_posteriors(rng, m, n, K, L, alpha=1.0):
    return Posteriors(rng.dirichlet(np.full(K, alpha), m), rng.dirichlet(np.full(L, alpha), n))


def random_params(rng, m, n, K, L):
    return BlockParams(
        rng.dirichlet(np.ones(K)),
        rng.dirichlet(np.ones(L)),
        rng.uniform(0.3, 2.0, m),
        rng.uniform(0.3, 2.0, n),
        rng.uniform(0.2, 3.0, (K, L)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["python", "cython"])
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    try:
        impl = kernels.get_backend(request.param)
    except ImportError:
        pytest.skip("compiled kernels not built")
    monkeypatch.setattr(kernels, "_impl", impl)
    return request.param


def set_partitions(n):
    """Every partition of ``range(n)`` as a restricted-growth label array."""
    out = []

    def grow(prefix, top):
        if len(prefix) == n:
            out.append(np.array(prefix))
            return
        for c in range(top + 2):
            grow(prefix + [c], max(top, c))

    if n:
        grow([0], 0)
    return out


def pair_count_ari(a, b):
    """ARI by explicit enumeration of all unordered element pairs."""
    n11 = n10 = n01 = n00 = 0
    n = len(a)
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            n11 += sa and sb
            n10 += sa and not sb
            n01 += sb and not sa
            n00 += not sa and not sb
    den = (n11 + n01) * (n01 + n00) + (n11 + n10) * (n10 + n00)
    if den == 0:
        return 1.0 if n10 == n01 == 0 else 0.0
    return 2.0 * (n11 * n00 - n01 * n10) / den
