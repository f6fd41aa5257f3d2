"""CSV artifacts.  Floats are written with repr, which round-trips exactly."""

from __future__ import annotations

import csv
import json

import numpy as np

from .barrier import BarrierTable
from .criticality import MatherFamily, MeanCycleResult


def _f(x):
    return repr(float(x))


def write_critical(path, mmc: MeanCycleResult, c_grid, c_analytic):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c_grid", "mu_star", "c_analytic", "error", "karp_value", "witness_length"])
        w.writerow([_f(c_grid), _f(mmc.mu_star), _f(c_analytic), _f(c_grid - c_analytic), _f(mmc.karp_value),
                    len(mmc.witness)])


def write_barrier(path, bt: BarrierTable):
    N = bt.N
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([_f(i / N) for i in range(N)])
        for row in bt.h:
            w.writerow([_f(v) for v in row])


def read_barrier(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    h = np.array([[float(v) for v in row] for row in body])
    if h.shape != (len(header), len(header)):
        raise ValueError(f"{path}: expected a square table, got {h.shape}")
    return h


def write_barrier_meta(path, bt: BarrierTable, key):
    meta = {"key": key, "steps_used": bt.steps_used, "residual": bt.residual,
            "critical": list(bt.critical), "trace": list(bt.trace)}
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_aubry(path, bt: BarrierTable, aubry):
    diag = bt.diagonal
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_index", "x", "h_diag"])
        for a in aubry:
            w.writerow([a, _f(a / bt.N), _f(diag[a])])


def write_mather(path, family: MatherFamily):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["measure_index", "source_index", "step_k", "weight"])
        for idx, m in enumerate(family.measures):
            for (j, k), wt in zip(m.edges, m.weights):
                w.writerow([idx, j, k, _f(wt)])


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
