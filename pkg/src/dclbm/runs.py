"""Fitting runs with restarts, the simulation harness, and the MovieLens workflow."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import io, spectral, synth, vem
from .metrics import adjusted_rand_index, chi_square_independence
from .model import Posteriors, hard_labels, one_hot
from .spectral import SpectralConfig
from .synth import SynthConfig

log = logging.getLogger(__name__)

MOVIELENS_GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery",
    "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
HARNESS_FIELDS = ["variant", "r", "replicate", "side", "method", "ari"]


def derive_seed(*key) -> int:
    """Deterministic 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


@dataclass
class RunSpec:
    K: int
    L: int
    input: Optional[str] = None
    synth: Optional[SynthConfig] = None
    mode: str = "counts"
    init: str = "spectral"
    init_path: Optional[str] = None
    seed: int = 0
    restarts: int = 1
    fit: vem.FitConfig = field(default_factory=vem.FitConfig)
    smoothing: float = 1e-6
    out: Optional[str] = None

    def __post_init__(self):
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.init not in ("spectral", "random", "given"):
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.init == "given" and not self.init_path:
            raise ValueError("init 'given' needs a labels file")
        if (self.input is None) == (self.synth is None):
            raise ValueError("give exactly one of an input path or a synth config")


class RunOutcome(NamedTuple):
    result: vem.FitResult
    restart_objectives: list
    data: io.EdgeList


def random_init(m, n, K, L, seed, eps=1e-6) -> Posteriors:
    rng = np.random.default_rng(seed)
    return Posteriors(one_hot(rng.integers(K, size=m), K, eps), one_hot(rng.integers(L, size=n), L, eps))


def _load(spec: RunSpec) -> io.EdgeList:
    if spec.input is not None:
        return io.ingest_edge_list(spec.input, spec.mode)
    s = synth.sample(spec.synth)
    return io.EdgeList(s.graph, io.default_ids(s.graph.m), io.default_ids(s.graph.n))


def _initial(spec, data, restart):
    g = data.graph
    if restart == 0 and spec.init == "spectral":
        return spectral.init_posteriors(g, spec.K, spec.L, SpectralConfig(seed=spec.seed, smoothing=spec.smoothing))
    if restart == 0 and spec.init == "given":
        z, w = io.read_labels(spec.init_path, data.row_ids, data.col_ids)
        return spectral.posteriors_from_labels(z, w, spec.K, spec.L, spec.smoothing)
    return random_init(g.m, g.n, spec.K, spec.L, derive_seed(spec.seed, restart), spec.smoothing)


def run_fit(spec: RunSpec) -> RunOutcome:
    """Fit with ``spec.restarts`` starts and keep the highest final criterion.

    The first start uses the requested initializer; later ones are random
    with seeds derived from ``(seed, restart)``. Outputs go to ``spec.out``
    when set.
    """
    data = _load(spec)
    best = None
    objectives = []
    for restart in range(spec.restarts):
        res = vem.fit(data.graph, spec.K, spec.L, _initial(spec, data, restart), spec.fit)
        objectives.append(res.objective)
        log.info("restart %d: objective %.6f after %d iterations", restart, res.objective, res.iterations)
        if best is None or res.objective > best.objective:
            best = res
    outcome = RunOutcome(best, objectives, data)
    if spec.out:
        write_fit_outputs(spec.out, outcome)
    return outcome


def write_fit_outputs(out, outcome: RunOutcome):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    res, data = outcome.result, outcome.data
    z, w = hard_labels(res.posteriors)
    io.write_labels(out / "labels.csv", z, w, data.row_ids, data.col_ids)
    io.write_posterior(out / "qz.csv", res.posteriors.qz, data.row_ids)
    io.write_posterior(out / "qw.csv", res.posteriors.qw, data.col_ids)
    io.write_trace(out / "trace.csv", res.objective_trace)
    io.write_params(out / "params.json", res, {"restart_objectives": [float(x) for x in outcome.restart_objectives]})
    io.write_id_map(out / "row_ids.tsv", data.row_ids)
    io.write_id_map(out / "col_ids.tsv", data.col_ids)


def simulate_replicate(cfg: SynthConfig, K, L, fit_cfg=vem.FitConfig(), spectral_seed=0):
    """One harness replicate: ARI of the spectral start and of the fit, per side."""
    s = synth.sample(cfg)
    z0, w0 = spectral.spectral_labels(s.graph, K, L, SpectralConfig(seed=spectral_seed))
    res = vem.fit(s.graph, K, L, spectral.posteriors_from_labels(z0, w0, K, L), fit_cfg)
    z, w = hard_labels(res.posteriors)
    return {
        ("rows", "spectral"): adjusted_rand_index(s.z, z0),
        ("cols", "spectral"): adjusted_rand_index(s.w, w0),
        ("rows", "dclbm"): adjusted_rand_index(s.z, z),
        ("cols", "dclbm"): adjusted_rand_index(s.w, w),
    }


def run_simulation_harness(
    r_grid=(0.4, 0.6, 0.8, 1.0),
    replicates: int = 20,
    variant: str = "dc",
    seed: int = 0,
    *,
    m: int = 800,
    n: int = 1000,
    fit_cfg: vem.FitConfig = vem.FitConfig(),
    out=None,
):
    """ARI table over the density grid in long format.

    Replicate ``b`` uses the seed derived from ``(seed, b)`` at every ``r``,
    so the density levels see the same labels and degree parameters.
    """
    if variant not in ("dc", "classical"):
        raise ValueError(f"variant must be 'dc' or 'classical', not {variant!r}")
    rows = []
    for r in r_grid:
        for b in range(replicates):
            rep_seed = derive_seed(seed, b)
            cfg = synth.simulation_design(r, classical=variant == "classical", seed=rep_seed, m=m, n=n)
            aris = simulate_replicate(cfg, 3, 4, fit_cfg, spectral_seed=rep_seed)
            for (side, method), value in aris.items():
                rows.append({"variant": variant, "r": r, "replicate": b, "side": side, "method": method, "ari": value})
    if out is not None:
        write_harness_csv(out, rows)
    return rows


def write_harness_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.DictWriter(fh, fieldnames=HARNESS_FIELDS)
        out.writeheader()
        for row in rows:
            out.writerow({**row, "ari": repr(float(row["ari"]))})


def summarize_harness(rows):
    """Mean ARI keyed by ``(variant, r, side, method)``."""
    acc: dict = {}
    for row in rows:
        acc.setdefault((row["variant"], row["r"], row["side"], row["method"]), []).append(row["ari"])
    return {key: float(np.mean(v)) for key, v in acc.items()}


def read_genre_table(path):
    """Parse a ``u.item``-style file: ``id|title|...|flag_1|...|flag_G``.

    Returns ``(ids, flags, names)``.
    """
    ids, flags = [], []
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("|")
            tail = []
            for tok in reversed(parts[1:]):
                if tok not in ("0", "1"):
                    break
                tail.append(int(tok))
            if not tail:
                raise ValueError(f"{path}:{lineno}: no genre flags")
            ids.append(parts[0])
            flags.append(tail[::-1])
    width = min(len(f) for f in flags)
    flags = np.array([f[-width:] for f in flags], dtype=np.int64)
    names = MOVIELENS_GENRES if width == len(MOVIELENS_GENRES) else [f"genre_{g + 1}" for g in range(width)]
    return ids, flags, names


def genre_contingency(movie_labels, col_ids, genre_ids, flags, names, L):
    """Estimated movie cluster x genre counts over single-genre movies.

    Genres with no single-genre movie and clusters with none are dropped so
    the table has positive margins.
    """
    where = {name: j for j, name in enumerate(col_ids)}
    table = np.zeros((L, flags.shape[1]), dtype=np.int64)
    kept = 0
    for mid, f in zip(genre_ids, flags):
        if f.sum() != 1 or mid not in where:
            continue
        table[movie_labels[where[mid]], int(np.argmax(f))] += 1
        kept += 1
    if kept == 0:
        raise ValueError("no single-category movies in the category table")
    rows = np.flatnonzero(table.sum(axis=1))
    cols = np.flatnonzero(table.sum(axis=0))
    return table[np.ix_(rows, cols)], rows, [names[c] for c in cols], kept


def _degree_histograms(degrees, labels, k, bins=20):
    edges = np.histogram_bin_edges(degrees, bins=bins)
    counts = [np.histogram(degrees[labels == c], bins=edges)[0].tolist() for c in range(k)]
    return {"bin_edges": edges.tolist(), "counts": counts}


def run_movielens_analysis(
    ratings_path, items_path, K: int = 3, L: int = 4, *, seed: int = 0, restarts: int = 1,
    fit_cfg: vem.FitConfig = vem.FitConfig(), out=None,
):
    """Fit the binary user x movie matrix and test movie clusters against genres."""
    if not Path(ratings_path).exists():
        raise FileNotFoundError(ratings_path)
    if not Path(items_path).exists():
        raise FileNotFoundError(items_path)
    spec = RunSpec(K=K, L=L, input=str(ratings_path), mode="binary", seed=seed, restarts=restarts, fit=fit_cfg,
                   out=str(out) if out else None)
    outcome = run_fit(spec)
    g, res = outcome.data.graph, outcome.result
    z, w = hard_labels(res.posteriors)

    genre_ids, flags, names = read_genre_table(items_path)
    table, cluster_rows, genres, kept = genre_contingency(w, outcome.data.col_ids, genre_ids, flags, names, L)
    stat, dof, p = chi_square_independence(table)

    block_edges = one_hot(z, K).T @ np.asarray(g.csr @ one_hot(w, L))
    share = block_edges / block_edges.sum(axis=1, keepdims=True)
    summary = {
        "n_users": g.m,
        "n_movies": g.n,
        "n_ratings": g.total_weight,
        "K": K,
        "L": L,
        "objective": float(res.objective),
        "iterations": int(res.iterations),
        "converged": bool(res.converged),
        "user_cluster_sizes": np.bincount(z, minlength=K).tolist(),
        "movie_cluster_sizes": np.bincount(w, minlength=L).tolist(),
        "rating_share": share.tolist(),
        "user_degree_histograms": _degree_histograms(g.row_degrees, z, K),
        "movie_degree_histograms": _degree_histograms(g.col_degrees, w, L),
        "single_category_movies": kept,
        "contingency": {
            "movie_clusters": (cluster_rows + 1).tolist(),
            "categories": genres,
            "table": table.tolist(),
        },
        "chi_square": {"statistic": stat, "dof": dof, "p_value": p},
    }
    if out is not None:
        io.write_json(Path(out) / "summary.json", summary)
    return summary
