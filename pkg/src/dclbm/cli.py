"""Command-line entry point: ``dclbm {fit,synth,simulate,movielens}``.

Settings come from flags, then an optional ``--config`` file of flat
``key = value`` lines (keys are the long flag names, dashes or
underscores), then built-in defaults.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, synth
from .runs import RunSpec, run_fit, run_movielens_analysis, run_simulation_harness, summarize_harness, write_harness_csv
from .vem import FitConfig


def read_config(path) -> dict:
    conf = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        conf[key.replace("-", "_")] = value
    return conf


def _common(p, k=None, l=None):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--k", type=int, default=k, help="number of row clusters")
    p.add_argument("--l", type=int, default=l, help="number of column clusters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8, help="relative objective change for convergence")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--out", help="output directory (or CSV file for simulate)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dclbm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit an edge list")
    p.add_argument("input", nargs="?", help="edge list: row_id col_id [weight]")
    _common(p)
    p.add_argument("--init", choices=["spectral", "random", "given"], default="spectral")
    p.add_argument("--init-file", help="labels.csv used by --init given")
    p.add_argument("--mode", choices=["counts", "binary"], default="counts")

    p = sub.add_parser("synth", help="sample a network from the simulation design")
    p.add_argument("--m", type=int, default=800)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--classical", action="store_true", help="all degree parameters equal to one")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="ARI table over the density grid")
    _common(p)
    p.add_argument("--r", type=float, nargs="+", default=[0.4, 0.6, 0.8, 1.0])
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--variant", choices=["dc", "classical"], nargs="+", default=["dc"])
    p.add_argument("--m", type=int, default=800)
    p.add_argument("--n", type=int, default=1000)

    p = sub.add_parser("movielens", help="MovieLens 100k biclustering and genre test")
    p.add_argument("--ratings", help="u.data")
    p.add_argument("--items", help="u.item")
    _common(p, k=3, l=4)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(conf) - known
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(sorted(unknown))}")
        # config values become defaults, so explicit flags still win
        typed = {}
        for action in sub._actions:
            if action.dest in conf:
                raw = conf[action.dest]
                conv = action.type or (lambda s: s)
                typed[action.dest] = [conv(x) for x in raw.split()] if action.nargs in ("+", "*") else conv(raw)
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def _fit_config(args):
    return FitConfig(max_iter=args.max_iter, tol=args.tol)


def cmd_fit(args):
    if not args.input:
        raise SystemExit("fit: an input edge list is required")
    if args.k is None or args.l is None:
        raise SystemExit("fit: --k and --l are required")
    spec = RunSpec(
        K=args.k, L=args.l, input=args.input, mode=args.mode, init=args.init, init_path=args.init_file,
        seed=args.seed, restarts=args.restarts, fit=_fit_config(args), out=args.out,
    )
    outcome = run_fit(spec)
    res = outcome.result
    print(f"objective {res.objective:.6f}  iterations {res.iterations}  converged {res.converged}")
    for msg in res.diagnostics:
        print(f"note: {msg}")


def cmd_synth(args):
    cfg = synth.simulation_design(args.r, classical=args.classical, seed=args.seed, m=args.m, n=args.n)
    s = synth.sample(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, cols = io.default_ids(cfg.m), io.default_ids(cfg.n)
    io.write_edge_list(out / "edges.tsv", s.graph, rows, cols)
    io.write_labels(out / "truth.csv", s.z, s.w, rows, cols)
    io.write_json(out / "truth.json", {
        "r": cfg.r, "seed": cfg.seed, "mu": cfg.mu.tolist(),
        "theta": s.theta.tolist(), "lambda": s.lam.tolist(),
    })
    print(f"{cfg.m} x {cfg.n} graph, {s.graph.nnz} nonzeros, total weight {s.graph.total_weight}")


def cmd_simulate(args):
    rows = []
    for variant in args.variant:
        rows += run_simulation_harness(
            args.r, args.replicates, variant, args.seed, m=args.m, n=args.n, fit_cfg=_fit_config(args),
        )
    if args.out:
        write_harness_csv(args.out, rows)
    for (variant, r, side, method), mean in sorted(summarize_harness(rows).items()):
        print(f"{variant:9s} r={r:<4} {side:4s} {method:8s} mean ARI {mean:.4f}")


def cmd_movielens(args):
    if not args.ratings or not args.items:
        raise SystemExit("movielens: --ratings and --items are required")
    summary = run_movielens_analysis(
        args.ratings, args.items, args.k, args.l, seed=args.seed, restarts=args.restarts,
        fit_cfg=_fit_config(args), out=args.out,
    )
    chi = summary["chi_square"]
    print(f"{summary['n_users']} users x {summary['n_movies']} movies, {summary['n_ratings']} ratings")
    print(f"movie clusters vs categories: chi2 {chi['statistic']:.3f}, dof {chi['dof']}, p {chi['p_value']:.4g}")
    np.set_printoptions(precision=3, suppress=True)
    print("rating share (user cluster x movie cluster):")
    print(np.array(summary["rating_share"]))


COMMANDS = {"fit": cmd_fit, "synth": cmd_synth, "simulate": cmd_simulate, "movielens": cmd_movielens}


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    COMMANDS[args.command](args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
