"""Compare the compiled and numpy kernel backends on a simulation-scale graph.

    python3 benchmarks/bench_kernels.py [--m 800] [--n 1000] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from dclbm import kernels, synth
from dclbm.bigraph import scaled_degree_params
from dclbm.spectral import init_posteriors
from dclbm.vem import fit


def best_of(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=800)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--r", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    s = synth.sample(synth.simulation_design(args.r, seed=0, m=args.m, n=args.n))
    g = s.graph
    theta, _ = scaled_degree_params(g)
    rng = np.random.default_rng(0)
    qw = rng.dirichlet(np.ones(4), g.n)
    log_mu = np.log(synth.design_mu(args.r))
    cost = rng.random(3)
    log_prior = np.log(np.full(3, 1 / 3))
    init = init_posteriors(g, 3, 4)
    print(f"graph {g.m} x {g.n}, {g.nnz} nonzeros")

    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy backend only")

    rows = {}
    for name in backends:
        impl = kernels.get_backend(name)
        view = g.row_view()
        kernels._impl = impl
        rows[name] = (
            best_of(lambda: impl.compressed_dot(*view, qw), args.repeat),
            best_of(lambda: impl.estep(*view, qw, theta, cost, log_mu, log_prior), args.repeat),
            best_of(lambda: fit(g, 3, 4, init), max(3, args.repeat // 5)),
        )
    kernels._impl = kernels.get_backend()

    print(f"{'backend':8s} {'A @ q':>12s} {'E step':>12s} {'full fit':>12s}")
    for name, (dot, est, full) in rows.items():
        print(f"{name:8s} {dot * 1e3:10.3f}ms {est * 1e3:10.3f}ms {full * 1e3:10.1f}ms")
    if len(rows) == 2:
        ratio = [p / c for p, c in zip(rows["python"], rows["cython"])]
        print(f"{'speedup':8s} {ratio[0]:11.2f}x {ratio[1]:11.2f}x {ratio[2]:11.2f}x")


if __name__ == "__main__":
    main()
