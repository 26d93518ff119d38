"""Edge-list ingestion and result serialization.

Ids in input files are arbitrary strings mapped to dense indices in order
of first appearance. Cluster labels in every file are 1-based.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .bigraph import BipartiteGraph


class EdgeListError(ValueError):
    pass


class EdgeList(NamedTuple):
    graph: BipartiteGraph
    row_ids: list
    col_ids: list


def ingest_edge_list(path, mode: str = "counts") -> EdgeList:
    """Read ``row_id col_id [weight ...]`` lines (tab or whitespace separated).

    In ``counts`` mode the third field is an integer weight (default 1) and
    repeated pairs are summed. In ``binary`` mode any extra fields are
    ignored and every observed pair becomes a single edge. Blank lines and
    lines starting with ``#`` are skipped.
    """
    if mode not in ("counts", "binary"):
        raise ValueError(f"mode must be 'counts' or 'binary', not {mode!r}")
    row_index: dict = {}
    col_index: dict = {}
    rows, cols, vals = [], [], []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            if len(fields) < 2:
                raise EdgeListError(f"{path}:{lineno}: expected 'row_id col_id [weight]'")
            weight = 1
            if mode == "counts" and len(fields) >= 3:
                try:
                    weight = int(fields[2])
                except ValueError:
                    raise EdgeListError(f"{path}:{lineno}: non-integer weight {fields[2]!r}") from None
                if weight < 0:
                    raise EdgeListError(f"{path}:{lineno}: negative weight {weight}")
            rows.append(row_index.setdefault(fields[0], len(row_index)))
            cols.append(col_index.setdefault(fields[1], len(col_index)))
            vals.append(weight)
    if not rows:
        raise EdgeListError(f"{path}: empty edge list")
    A = sp.coo_matrix(
        (np.asarray(vals, dtype=np.int64), (np.asarray(rows), np.asarray(cols))),
        shape=(len(row_index), len(col_index)),
    ).tocsr()
    A.sum_duplicates()
    if mode == "binary":
        A.data = (A.data > 0).astype(np.int64)
    return EdgeList(BipartiteGraph.from_sparse(A), list(row_index), list(col_index))


def write_edge_list(path, g: BipartiteGraph, row_ids=None, col_ids=None):
    """Write ``row_id<TAB>col_id<TAB>weight`` lines, one per stored entry."""
    row_ids = row_ids or default_ids(g.m)
    col_ids = col_ids or default_ids(g.n)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, a in g.triples():
            fh.write(f"{row_ids[i]}\t{col_ids[j]}\t{a}\n")


def default_ids(count: int) -> list:
    return [str(i + 1) for i in range(count)]


def write_id_map(path, ids):
    with open(path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(ids):
            fh.write(f"{i}\t{name}\n")


def _fmt(x) -> str:
    return repr(float(x))


def write_labels(path, z, w, row_ids, col_ids):
    """``side,id,cluster`` rows with 1-based clusters."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["side", "id", "cluster"])
        for side, labels, ids in (("row", z, row_ids), ("col", w, col_ids)):
            for name, lab in zip(ids, labels):
                out.writerow([side, name, int(lab) + 1])


def read_labels(path, row_ids, col_ids):
    """Inverse of :func:`write_labels`; returns 0-based ``(z, w)``.

    Every id of the graph must be present.
    """
    found = {"row": {}, "col": {}}
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            found[rec["side"]][rec["id"]] = int(rec["cluster"]) - 1
    out = []
    for side, ids in (("row", row_ids), ("col", col_ids)):
        missing = [name for name in ids if name not in found[side]]
        if missing:
            raise ValueError(f"{path}: no {side} label for id {missing[0]!r}")
        out.append(np.array([found[side][name] for name in ids], dtype=np.int64))
    return tuple(out)


def write_posterior(path, q, ids):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["id"] + [f"p{k + 1}" for k in range(q.shape[1])])
        for name, row in zip(ids, q):
            out.writerow([name] + [_fmt(x) for x in row])


def write_trace(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["iteration", "objective"])
        for t, v in enumerate(trace, 1):
            out.writerow([t, _fmt(v)])


def write_params(path, result, extra=None):
    p = result.params
    doc = {
        "pi": [float(x) for x in p.pi],
        "rho": [float(x) for x in p.rho],
        "mu": [[float(x) for x in row] for row in p.mu],
        "theta": [float(x) for x in p.theta],
        "lambda": [float(x) for x in p.lam],
        "objective": float(result.objective),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "diagnostics": list(result.diagnostics),
    }
    if extra:
        doc.update(extra)
    write_json(path, doc)


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
