"""Pipeline stages: kernel, critical value, barrier, Mather measures, discounted ladder, selection.

Each stage fills a field of the shared ``Context`` and writes its tables.
Later stages call earlier ones on demand, so any subcommand can run alone.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import tables
from .barrier import BarrierTable, aubry_nodes, peierls, weak_kam_row
from .config import ExperimentConfig, barrier_key
from .criticality import critical_value, extreme_measures, min_mean_cycle, tight_graph
from .discounted import (backward_trajectory, check_alpha_on_aubry, solve_discounted, write_solution_csv,
                         write_trajectory_csv)
from .lattice import Grid, build_kernel, circular_distance
from .model import oracle
from .selection import lambda_ladder, u0_formula, write_ladder_csv, write_selection_csv

logger = logging.getLogger(__name__)


@dataclass
class Context:
    cfg: ExperimentConfig
    grid: Grid = None
    raw: object = None
    mmc: object = None
    c_grid: float = None
    kernel: object = None  # kernel rebuilt with c = c_grid
    oracle: object = None
    barrier: BarrierTable = None
    barrier_reused: bool = False
    aubry: list = None
    weak_kam: object = None
    tight: object = None
    family: object = None
    formula: object = None
    discounted: object = None
    trajectory: object = None
    selection: object = None
    timings: dict = field(default_factory=dict)

    @property
    def out(self):
        return self.cfg.out_dir

    @property
    def tol_tight(self):
        if self.cfg.tol_tight is not None:
            return self.cfg.tol_tight
        return 1e-8 * (1 + abs(self.c_grid)) * self.cfg.dt

    def wants(self, table):
        return table in self.cfg.tables

    def _timed(self, name, t0):
        self.timings[name] = time.perf_counter() - t0


def new_context(cfg: ExperimentConfig) -> Context:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    tables.write_json(cfg.out_dir / "config.effective.json", cfg.effective)
    return Context(cfg)


def run_critical(ctx: Context):
    if ctx.kernel is not None:
        return ctx
    t0 = time.perf_counter()
    cfg = ctx.cfg
    ctx.grid = Grid(cfg.N)
    ctx.raw = build_kernel(ctx.grid, cfg.model, cfg.K, cfg.dt, 0.0, cfg.quadrature)
    ctx.mmc = min_mean_cycle(ctx.raw)
    ctx.c_grid = critical_value(ctx.raw)
    ctx.kernel = ctx.raw.with_constant(ctx.c_grid)
    ctx.oracle = oracle(cfg.model)
    if ctx.wants("critical"):
        tables.write_critical(ctx.out / "critical.csv", ctx.mmc, ctx.c_grid, ctx.oracle.c_analytic)
    ctx._timed("critical", t0)
    logger.info("c_grid = %.12g (analytic %.12g)", ctx.c_grid, ctx.oracle.c_analytic)
    return ctx


def _load_barrier(ctx: Context):
    path = ctx.out / "barrier.csv"
    meta_path = ctx.out / "barrier_meta.json"
    if not (path.exists() and meta_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    if meta.get("key") != json.loads(json.dumps(barrier_key(ctx.cfg))):
        return None
    h = tables.read_barrier(path)
    if h.shape != (ctx.cfg.N, ctx.cfg.N):
        return None
    h.setflags(write=False)
    return BarrierTable(h, meta["steps_used"], meta["residual"], ctx.kernel, None,
                        tuple(meta["critical"]), meta["trace"])


def run_barrier(ctx: Context, reuse=True):
    run_critical(ctx)
    if ctx.barrier is not None:
        return ctx
    t0 = time.perf_counter()
    cfg = ctx.cfg
    bt = _load_barrier(ctx) if reuse else None
    ctx.barrier_reused = bt is not None
    if bt is None:
        bt = peierls(ctx.kernel, cfg.tol_h, cfg.window)
        if ctx.wants("barrier"):
            tables.write_barrier(ctx.out / "barrier.csv", bt)
            tables.write_barrier_meta(ctx.out / "barrier_meta.json", bt, barrier_key(cfg))
    ctx.barrier = bt
    ctx.aubry = aubry_nodes(bt, cfg.tol_aubry)
    if ctx.wants("aubry"):
        tables.write_aubry(ctx.out / "aubry.csv", bt, ctx.aubry)
    ctx._timed("barrier", t0)
    logger.info("barrier: %d squarings, %d Aubry nodes%s", bt.steps_used, len(ctx.aubry),
                " (reused)" if ctx.barrier_reused else "")
    return ctx


def run_mather(ctx: Context):
    run_barrier(ctx)
    if ctx.family is not None:
        return ctx
    t0 = time.perf_counter()
    cfg = ctx.cfg
    ctx.weak_kam = weak_kam_row(ctx.barrier, ctx.aubry[0], cfg.tol_fp)
    ctx.tight = tight_graph(ctx.kernel, ctx.weak_kam.u, ctx.tol_tight)
    ctx.family = extreme_measures(ctx.tight, cfg.cycle_length, cfg.max_measures)
    if ctx.wants("mather"):
        tables.write_mather(ctx.out / "mather.csv", ctx.family)
    ctx._timed("mather", t0)
    logger.info("Mather family: %d measures", len(ctx.family.measures))
    return ctx


def trajectory_start(ctx: Context):
    """Node farthest from the Aubry set (lowest index on ties)."""
    N = ctx.cfg.N
    dist = [min(circular_distance(i, a, N) for a in ctx.aubry) for i in range(N)]
    return int(np.argmax(dist))


def run_discounted(ctx: Context):
    """Discounted solution at the first ladder rung plus one backward trajectory."""
    run_barrier(ctx)
    if ctx.discounted is not None:
        return ctx
    t0 = time.perf_counter()
    cfg = ctx.cfg
    ctx.discounted = solve_discounted(ctx.kernel, cfg.alpha, cfg.lambdas[0], barrier=ctx.barrier, aubry=ctx.aubry,
                                      tol_fp=cfg.tol_fp, max_iter=cfg.max_iter)
    ctx.trajectory = backward_trajectory(ctx.discounted, trajectory_start(ctx), cfg.trajectory_steps)
    if ctx.wants("discounted"):
        write_solution_csv(ctx.out / "discounted.csv", ctx.discounted)
    if ctx.wants("trajectory"):
        write_trajectory_csv(ctx.out / "trajectory.csv", ctx.trajectory, cfg.N)
    ctx._timed("discounted", t0)
    return ctx


def run_limit(ctx: Context):
    run_mather(ctx)
    if ctx.selection is not None:
        return ctx
    cfg = ctx.cfg
    t0 = time.perf_counter()
    check_alpha_on_aubry(cfg.alpha, ctx.kernel, ctx.aubry)
    ctx.formula = u0_formula(ctx.barrier, ctx.family, cfg.alpha)
    ctx.selection = lambda_ladder(ctx.kernel, cfg.alpha, cfg.lambdas, barrier=ctx.barrier, family=ctx.family,
                                  aubry=ctx.aubry, tol_fp=cfg.tol_fp, max_iter=cfg.max_iter, formula=ctx.formula)
    if ctx.wants("ladder"):
        write_ladder_csv(ctx.out / "ladder.csv", ctx.selection)
    if ctx.wants("selection"):
        write_selection_csv(ctx.out / "selection.csv", ctx.selection, ctx.kernel.nodes)
    ctx._timed("limit", t0)
    logger.info("ladder final gap %.3g", ctx.selection.final_gap)
    return ctx
