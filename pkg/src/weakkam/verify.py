"""Registered invariant suite behind ``weakkam verify``.

Every check returns a ``CheckResult`` with a status of pass, warn or fail.
A check that raises is recorded as a failure carrying the error message, so
one broken stage does not hide the others.
"""

from __future__ import annotations

import dataclasses
import filecmp
import logging
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from . import pipeline
from .barrier import comparison_check, fixed_point_residual, is_subsolution, peierls, tropical_square
from .criticality import check_closed, mather_in_aubry, min_mean_cycle
from .discounted import (discounted_step, lipschitz_bound, ladder_bounds, max_excursion,
                         backward_trajectory, policy_paths, solve_discounted, solve_time_changed)
from .errors import ConvergenceError, PreconditionError
from .lattice import CostKernel, densify, one_step_min
from .model import AlphaProfile, Family, eval_alpha, eval_H, eval_L, fenchel_gap
from .selection import (baby_case_formula, constraint_check, gaps_decreasing, ratio_for_measure,
                        u0_formula)

logger = logging.getLogger(__name__)

PASS, WARN, FAIL = "pass", "warn", "fail"


@dataclass
class CheckResult:
    name: str
    module: str
    status: str
    measured: object
    threshold: object
    anchor: str
    detail: str = ""

    def as_dict(self):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(self).items()}


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    return v


REGISTRY = []


def check(module, name, anchor):
    def deco(fn):
        REGISTRY.append((module, name, anchor, fn))
        return fn
    return deco


def _le(measured, threshold, detail=""):
    return (PASS if measured <= threshold else FAIL), measured, threshold, detail


def _ge(measured, threshold, detail=""):
    return (PASS if measured >= threshold else FAIL), measured, threshold, detail


def _na(reason):
    return PASS, None, None, f"not applicable: {reason}"


class Suite:
    """Shared state for one verification run; expensive pieces are computed once."""

    def __init__(self, ctx: pipeline.Context):
        self.ctx = ctx
        self.cfg = ctx.cfg
        self.rng = np.random.default_rng(ctx.cfg.seed)

    # pipeline accessors
    def kernel(self):
        return pipeline.run_critical(self.ctx).kernel

    def barrier(self):
        return pipeline.run_barrier(self.ctx).barrier

    def family(self):
        return pipeline.run_mather(self.ctx).family

    def selection(self):
        return pipeline.run_limit(self.ctx).selection

    def formula(self):
        pipeline.run_limit(self.ctx)
        return self.ctx.formula

    def constants_are_sub(self):
        k = self.kernel()
        return is_subsolution(np.zeros(k.N), k) <= self.cfg.tol_fp

    def alternatives(self):
        alts = list(self.cfg.alpha_alternatives)
        if not alts:
            alts = [AlphaProfile.constant(1.0), AlphaProfile.positive_sinusoid(2.0, 1.0, 0.5)]
        return alts

    def positive_alpha(self):
        a = self.cfg.alpha
        if np.min(eval_alpha(a, np.arange(self.cfg.N) / self.cfg.N)) > 0:
            return a
        return AlphaProfile.constant(1.0)


# -- model --------------------------------------------------------------------

@check("model", "fenchel_gap_nonnegative", "Fenchel inequality L(x,v) + H(x,p) >= p v")
def _fenchel(s: Suite):
    rng = s.rng
    x = rng.random(1000)
    v = rng.uniform(-5, 5, 1000)
    p = rng.uniform(-5, 5, 1000)
    gap = fenchel_gap(s.cfg.model, x, v, p)
    return _ge(float(gap.min()), -1e-12, "min over 1000 samples")


@check("model", "legendre_round_trip", "H is recovered from L by the Legendre transform")
def _legendre(s: Suite):
    rng = s.rng
    x = rng.random(200)
    p = rng.uniform(-3, 3, 200)
    errs = []
    for n in (201, 801, 3201):
        vs = np.linspace(-8, 8, n)
        best = np.max(p[:, None] * vs[None, :] - eval_L(s.cfg.model, x[:, None], vs[None, :]), axis=1)
        errs.append(float(np.max(np.abs(eval_H(s.cfg.model, x, p) - best))))
    ok = all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] <= 1e-3
    return (PASS if ok else FAIL), errs, "decreasing, last <= 1e-3", "v-nets of 201, 801, 3201 points on [-8, 8]"


@check("model", "alpha_nonnegative", "the discount weight is nonnegative")
def _alpha_nonneg(s: Suite):
    xs = np.arange(10_000) / 10_000
    lo = min(float(eval_alpha(a, xs).min()) for a in [s.cfg.alpha, *s.alternatives()])
    return _ge(lo, 0.0, "configured profile and alternatives, 10^4 points")


@check("model", "oracle_critical_value_sampling", "critical value of a mechanical Hamiltonian is max V")
def _oracle_c(s: Suite):
    orc = pipeline.run_critical(s.ctx).oracle
    m = s.cfg.model
    if m.family is Family.ROTATION:
        return _le(abs(orc.c_analytic - 0.5 * m.omega**2), 0.0)
    sampled = float(np.max(m.V(np.arange(100_000) / 100_000)))
    return _le(abs(orc.c_analytic - sampled), 1e-8, "10^5-point sample")


@check("model", "oracle_quadrature_refinement", "analytic barrier reproduced by refined quadrature")
def _oracle_quad(s: Suite):
    orc = pipeline.run_critical(s.ctx).oracle
    if s.cfg.model.family is Family.ROTATION or orc.aubry_whole_circle:
        return _na("closed-form barrier, no quadrature")
    fine = dataclasses.replace(orc, quad_tol=1e-10, _cache={})
    y = s.rng.random(20)
    x = s.rng.random(20)
    return _le(float(np.max(np.abs(orc.barrier(y, x) - fine.barrier(y, x)))), 1e-8, "20 random pairs")


# -- lattice ------------------------------------------------------------------

@check("lattice", "one_step_monotone", "Lax-Oleinik step is order preserving")
def _monotone(s: Suite):
    k = s.kernel()
    worst = -np.inf
    for _ in range(20):
        u = s.rng.normal(size=k.N)
        up = u + np.abs(s.rng.normal(size=k.N))
        worst = max(worst, float(np.max(one_step_min(k, u) - one_step_min(k, up))))
    return _le(worst, 0.0, "max of T u - T u' over 20 pairs u <= u'")


@check("lattice", "one_step_shift_equivariance", "Lax-Oleinik step commutes with constants")
def _equivariance(s: Suite):
    k = s.kernel()
    worst = 0.0
    for _ in range(20):
        u = s.rng.normal(size=k.N)
        a = float(s.rng.normal())
        worst = max(worst, float(np.max(np.abs(one_step_min(k, u + a) - (one_step_min(k, u) + a)))))
    return _le(worst, 1e-12, "rounding only")


@check("lattice", "kernel_mirror_symmetry", "even potential gives a mirror-symmetric kernel")
def _mirror(s: Suite):
    m = s.cfg.model
    if m.family is not Family.MECHANICAL or not m.is_even or s.cfg.N % 4:
        return _na("potential is not even about a grid node")
    k = s.kernel()
    mirrored = k.cost[(-np.arange(k.N)) % k.N][:, ::-1]
    return _le(float(np.max(np.abs(k.cost - mirrored))), 1e-12 * (1 + float(np.max(np.abs(k.cost)))))


@check("lattice", "one_step_bandwidth", "steps never exceed K cells")
def _bandwidth(s: Suite):
    k = s.kernel()
    leaks = 0
    for j in range(0, k.N, max(1, k.N // 16)):
        u = np.full(k.N, 1e20)
        u[j] = 0.0
        reached = np.nonzero(one_step_min(k, u) < 1e19)[0]
        leaks += sum(1 for i in reached if min((i - j) % k.N, (j - i) % k.N) > k.K)
    return _le(leaks, 0, "targets reached from a single finite node outside |k| <= K")


# -- criticality --------------------------------------------------------------

def brute_force_min_mean(kernel: CostKernel):
    """Exact minimum cycle mean by enumerating every simple cycle (tiny kernels only)."""
    g = nx.DiGraph()
    for j, k in kernel.edges():
        i = (j + k) % kernel.N
        c = kernel.edge_cost(j, k)
        if not g.has_edge(j, i) or c < g[j][i]["w"]:
            g.add_edge(j, i, w=c)
    best = math.inf
    for cyc in nx.simple_cycles(g):
        edges = list(zip(cyc, cyc[1:] + cyc[:1]))
        best = min(best, math.fsum(g[a][b]["w"] for a, b in edges) / len(edges))
    return best


def random_tiny_kernel(rng, N=None, K=None):
    N = int(rng.integers(3, 9)) if N is None else N
    K = int(rng.integers(1, 3)) if K is None else K
    K = max(1, min(K, (N - 1) // 2))
    return CostKernel.from_table(rng.uniform(-1, 1, size=(N, 2 * K + 1)))


@check("criticality", "karp_matches_brute_force", "minimum mean cycle equals the minimal closed-measure cost")
def _karp(s: Suite):
    mismatches = 0
    for _ in range(20):
        k = random_tiny_kernel(s.rng)
        if min_mean_cycle(k).mu_star != brute_force_min_mean(k):
            mismatches += 1
    return _le(mismatches, 0, "20 random kernels, N <= 8, K <= 2, exact equality")


@check("criticality", "critical_value_vs_oracle", "discrete critical value approximates c")
def _c_oracle(s: Suite):
    ctx = pipeline.run_critical(s.ctx)
    return _le(abs(ctx.c_grid - ctx.oracle.c_analytic), 0.05)


@check("criticality", "rebuilt_kernel_min_cycle_mean", "the critical constant makes the minimal cycle mean zero")
def _rebuilt(s: Suite):
    return _le(abs(min_mean_cycle(s.kernel()).mu_star), 1e-10)


@check("criticality", "mather_mean_cost", "Mather measures have action -c")
def _mather_cost(s: Suite):
    fam = s.family()
    k = s.kernel()
    worst = max(abs(m.mean_running_cost(k) + s.ctx.c_grid) for m in fam.measures)
    return _le(worst, s.cfg.tol_mmc, f"{len(fam.measures)} measures")


@check("criticality", "mather_closed", "Mather measures are closed")
def _mather_closed(s: Suite):
    return _le(max(check_closed(m) for m in s.family().measures), 1e-12)


@check("criticality", "mather_in_aubry", "Mather set is contained in the Aubry set")
def _inclusion(s: Suite):
    ok, rep = mather_in_aubry(s.family(), s.ctx.aubry)
    return (PASS if ok else FAIL), len(rep["offending"]), 0, "support nodes farther than one cell from Aubry"


@check("criticality", "mather_enumeration_complete", "extreme measures enumerated without hitting the cap")
def _capped(s: Suite):
    fam = s.family()
    if fam.capped:
        return WARN, len(fam.measures), s.cfg.max_measures, "; ".join(fam.diagnostics)
    return PASS, len(fam.measures), s.cfg.max_measures, ""


# -- barrier ------------------------------------------------------------------

@check("barrier", "powers_bounded", "no negative cycles at the critical value")
def _powers(s: Suite):
    # any subsolution w gives the floor A^n(j, i) >= w(i) - w(j) for every n
    k = s.kernel()
    bt = s.barrier()
    w = np.asarray(bt.h[s.ctx.aubry[0]])
    floor = w[None, :] - w[:, None]
    A = densify(k)
    scale = float(np.max(np.abs(A[A < 1e15])))
    slack = []
    peak = 0.0
    for _ in range(64):
        A = tropical_square(A)
        slack.append(float(np.min(A - floor)))
        peak = max(peak, float(np.max(np.abs(A[A < 1e15]))))
    worst = min(slack)
    thr = -s.cfg.tol_aubry
    if worst >= thr:
        return PASS, worst, thr, f"64 squarings, largest entry {peak:.3g}"
    # a cycle of exact mean zero still carries a few ulps of rounding per edge,
    # which the 2^s-step power multiplies by 2^s
    eps = np.finfo(float).eps
    envelope = [thr - 2.0**st * 4 * eps * scale for st in range(1, 65)]
    if all(v >= e for v, e in zip(slack, envelope)):
        stage = next(st for st, v in enumerate(slack, 1) if v < thr)
        return (WARN, worst, thr, f"drift below the floor starts at squaring {stage} and stays inside the "
                f"floating-point rounding envelope; largest entry {peak:.3g}")
    return FAIL, worst, thr, "drift beyond rounding: negative cycle"


@check("barrier", "triangle_inequality", "triangle inequality for the barrier")
def _triangle(s: Suite):
    h = s.barrier().h
    N = h.shape[0]
    j, m, i = (s.rng.integers(0, N, 10_000) for _ in range(3))
    return _le(float(np.max(h[j, i] - h[j, m] - h[m, i])), 1e-8, "10^4 random triples")


@check("barrier", "diagonal_nonnegative", "h(x, x) >= 0")
def _diag(s: Suite):
    return _ge(float(np.min(s.barrier().diagonal)), -s.cfg.tol_aubry)


@check("barrier", "aubry_matches_oracle", "Aubry set is where h(x, x) = 0")
def _aubry_oracle(s: Suite):
    ctx = pipeline.run_barrier(s.ctx)
    N = s.cfg.N
    if ctx.oracle.aubry_whole_circle:
        return _le(N - len(ctx.aubry), 0, "every node should be an Aubry node")
    pts = np.asarray(ctx.oracle.aubry_points)
    xs = np.asarray(ctx.aubry) / N
    def dist(a, b):
        d = np.abs(a[:, None] - b[None, :]) % 1.0
        return np.minimum(d, 1 - d)
    far = int(np.sum(dist(xs, pts).min(axis=1) > 1.0 / N + 1e-12))
    missing = int(np.sum(dist(pts, xs).min(axis=1) > 1.0 / N + 1e-12))
    return _le(far + missing, 0, f"{len(xs)} nodes vs {len(pts)} analytic points, one-cell slack")


@check("barrier", "barrier_vs_oracle", "Peierls barrier matches its analytic closure")
def _barrier_oracle(s: Suite):
    ctx = pipeline.run_barrier(s.ctx)
    H = ctx.oracle.barrier_table(ctx.kernel.nodes)
    return _le(float(np.max(np.abs(ctx.barrier.h - H))), 0.1)


@check("barrier", "weak_kam_rows_fixed", "rows h(a, .) are critical solutions")
def _rows_fixed(s: Suite):
    bt = s.barrier()
    aub = s.ctx.aubry
    picks = aub[:: max(1, len(aub) // 16)]
    res = max(fixed_point_residual(bt.kernel, bt.h[a]) for a in picks)
    return _le(res, s.cfg.tol_fp, f"{len(picks)} Aubry rows")


@check("barrier", "reversed_rows_subsolutions", "-h(., a) is a critical subsolution")
def _rev_rows(s: Suite):
    bt = s.barrier()
    aub = s.ctx.aubry
    picks = aub[:: max(1, len(aub) // 16)]
    return _le(max(is_subsolution(-bt.h[:, a], bt.kernel) for a in picks), s.cfg.tol_fp)


@check("barrier", "subsolutions_below_barrier", "u(x) - u(y) <= h(y, x) for subsolutions u")
def _sub_below(s: Suite):
    bt = s.barrier()
    k = s.kernel()
    cands = [bt.h[s.ctx.aubry[0]], -bt.h[:, s.ctx.aubry[-1]], s.formula().u0]
    if s.constants_are_sub():
        cands.append(np.zeros(k.N))
    j = s.rng.integers(0, k.N, 10_000)
    i = s.rng.integers(0, k.N, 10_000)
    worst = -np.inf
    for u in cands:
        if is_subsolution(u, k) <= s.cfg.tol_sel:
            worst = max(worst, float(np.max(u[i] - u[j] - bt.h[j, i])))
    return _le(worst, 1e-8, f"{len(cands)} candidate subsolutions, 10^4 pairs each")


@check("barrier", "aubry_uniqueness_set", "the Aubry set is a uniqueness set")
def _uniqueness_set(s: Suite):
    bt = s.barrier()
    aub = s.ctx.aubry
    ua = np.array(bt.h[aub[0]])
    ub = np.array(bt.h[aub[-1]])
    ub = ub + max(0.0, float(np.max(ua[aub] - ub[aub])))
    ok = [comparison_check(ua, ua, aub), comparison_check(ua - 1.0, ua, aub), comparison_check(ua, ub, aub),
          comparison_check(-bt.h[:, aub[0]] + float(np.max(bt.h[:, aub[0]])) - 10.0, ua, aub)]
    return _le(ok.count(False), 0, "comparison on four sub/super pairs")


@check("barrier", "window_doubling_invariance", "the liminf is a limit")
def _window(s: Suite):
    bt = s.barrier()
    other = peierls(s.kernel(), s.cfg.tol_h, 2 * s.cfg.window)
    return _le(float(np.max(np.abs(other.h - bt.h))), s.cfg.tol_h)


# -- discounted ---------------------------------------------------------------

@check("discounted", "bellman_residual", "u_lambda is the fixed point of the discounted operator")
def _bellman(s: Suite):
    sols = s.selection().solutions
    return _le(max(sol.residual for sol in sols), s.cfg.tol_fp, f"{len(sols)} rungs")


@check("discounted", "ladder_equibounded", "the family u_lambda is equibounded")
def _equibounded(s: Suite):
    stats = ladder_bounds(s.selection().solutions)
    B = 2 * float(np.max(np.abs(s.barrier().h)))
    return _le(max(b for _, b, _ in stats), B, "bound: twice the sup of the barrier")


@check("discounted", "ladder_equilipschitz", "the family u_lambda is equi-Lipschitz")
def _equilip(s: Suite):
    stats = ladder_bounds(s.selection().solutions)
    sup_u = max(b for _, b, _ in stats)
    bound = lipschitz_bound(s.kernel(), s.cfg.alpha, s.cfg.lambdas[0], sup_u)
    return _le(max(lip for _, _, lip in stats), bound, "bound from one-cell costs and the largest discount")


@check("discounted", "unique_fixed_point", "the discounted equation has a unique solution")
def _unique(s: Suite):
    bt = s.barrier()
    lam = s.cfg.lambdas[0]
    tight = s.cfg.tol_fp * 1e-3
    a = solve_discounted(s.kernel(), s.cfg.alpha, lam, barrier=bt, aubry=s.ctx.aubry, tol_fp=tight,
                         max_iter=s.cfg.max_iter)
    b = solve_discounted(s.kernel(), s.cfg.alpha, lam, barrier=bt, aubry=s.ctx.aubry, tol_fp=tight,
                         max_iter=s.cfg.max_iter, warm_start=np.asarray(bt.h[s.ctx.aubry[0]]) + 1.0)
    return _le(float(np.max(np.abs(a.u - b.u))), 10 * s.cfg.tol_fp,
               "two warm starts, each solved to residual tol_fp / 1000")


@check("discounted", "discounted_comparison", "subsolutions of the discounted equation lie below u_lambda")
def _disc_comp(s: Suite):
    sol = s.selection().solutions[0]
    k = s.kernel()
    w = sol.u - 1e-3
    slack = float(np.max(w - discounted_step(k, s.cfg.alpha, sol.lam, w)))
    if slack > s.cfg.tol_fp:
        return FAIL, slack, s.cfg.tol_fp, "u - delta failed the subsolution re-check"
    return _le(float(np.max(w - sol.u)), s.cfg.tol_fp, "w = u_lambda - 1e-3")


@check("discounted", "scaling_covariance", "only the product lambda alpha enters")
def _scaling(s: Suite):
    k = s.kernel()
    lam = s.cfg.lambdas[0]
    kw = dict(barrier=s.barrier(), aubry=s.ctx.aubry, tol_fp=s.cfg.tol_fp, max_iter=s.cfg.max_iter)
    a = solve_discounted(k, s.cfg.alpha.scaled(2.0), lam, **kw)
    b = solve_discounted(k, s.cfg.alpha, 2.0 * lam, **kw)
    u = s.rng.normal(size=k.N)
    step = float(np.max(np.abs(discounted_step(k, s.cfg.alpha.scaled(2.0), lam, u)
                               - discounted_step(k, s.cfg.alpha, 2 * lam, u))))
    return _le(max(step, float(np.max(np.abs(a.u - b.u)))), 1e-12, "(lambda, 2 alpha) vs (2 lambda, alpha)")


@check("discounted", "vanishing_alpha_rejected", "alpha must be positive on the Aubry set")
def _rejected(s: Suite):
    aubry = pipeline.run_barrier(s.ctx).aubry
    try:
        solve_discounted(s.kernel(), AlphaProfile.vanishing_band(0.0, 1.0), 0.5, aubry=aubry)
    except PreconditionError as exc:
        return PASS, 1, 1, str(exc)
    return FAIL, 0, 1, "alpha = 0 everywhere was accepted"


@check("discounted", "zero_alpha_reduces_to_lax_oleinik", "with alpha = 0 there is no discount")
def _zero_alpha(s: Suite):
    k = s.kernel()
    u = s.rng.normal(size=k.N)
    d = float(np.max(np.abs(discounted_step(k, AlphaProfile.constant(0.0), 0.7, u) - one_step_min(k, u))))
    return _le(d, 0.0, "exact")


@check("discounted", "time_change_equivalence", "positive alpha: rescaled Hamiltonian with uniform discount")
def _bb2(s: Suite):
    a = s.positive_alpha()
    k = s.kernel()
    lam = s.cfg.lambdas[0]
    start = np.asarray(s.barrier().h[s.ctx.aubry[0]])
    start = start - start.min()
    u1 = solve_discounted(k, a, lam, aubry=s.ctx.aubry, tol_fp=s.cfg.tol_fp, max_iter=s.cfg.max_iter,
                          warm_start=start).u
    u2, _, _ = solve_time_changed(k, a, lam, tol_fp=s.cfg.tol_fp, max_iter=s.cfg.max_iter, warm_start=start)
    note = "configured alpha" if a is s.cfg.alpha else "alpha = 1 (configured alpha vanishes somewhere)"
    return _le(float(np.max(np.abs(u1 - u2))), 5 * s.cfg.tol_fp, note)


@check("discounted", "trajectory_reconstruction", "u_lambda is recovered along its optimal backward path")
def _trajectory(s: Suite):
    sel = s.selection()
    n = s.cfg.trajectory_steps
    N = s.cfg.N
    starts = sorted({0, N // 3, N // 2, s.ctx.aubry[0], pipeline.trajectory_start(s.ctx)})
    rep = pipeline.run_discounted(s.ctx).trajectory
    worst = abs(rep.value_recomputed - float(s.ctx.discounted.u[rep.path[0]]))
    for sol in (sel.solutions[0], sel.solutions[-1]):
        for st in starts:
            rep = backward_trajectory(sol, st, n)
            worst = max(worst, abs(rep.value_recomputed - float(sol.u[st])))
    return _le(worst, max(n, 1) * s.cfg.tol_fp, f"{len(starts)} starts, first and last rung, {n} steps")


@check("discounted", "excursion_uniform", "optimal paths return to {alpha > eps} in bounded time")
def _excursion(s: Suite):
    sel = s.selection()
    N = s.cfg.N
    a_nodes = eval_alpha(s.cfg.alpha, np.arange(N) / N)
    eps = 0.5 * float(np.min(a_nodes[s.ctx.aubry]))
    gaps = []
    for sol in sel.solutions:
        paths = policy_paths(sol, np.arange(N), s.cfg.excursion_steps)
        gaps.append(max_excursion(paths, a_nodes, eps))
    bound = s.cfg.excursion_window / s.cfg.dt
    return _le(max(gaps), bound, f"eps = {eps:g}; per-rung max gaps {gaps}")


@check("discounted", "lambda_u_vanishes", "lambda u_lambda -> 0 once c is removed")
def _lambda_u(s: Suite):
    vals = [sol.lam * float(np.max(np.abs(sol.u))) for sol in s.selection().solutions]
    ok = vals[-1] <= vals[0] and vals[-1] <= s.cfg.lambdas[-1]
    return (PASS if ok else FAIL), vals[-1], s.cfg.lambdas[-1], "lambda_min sup|u| against lambda_min"


@check("discounted", "monotone_in_lambda", "u_lambda is nondecreasing as lambda decreases (constants are subsolutions)")
def _bb1(s: Suite):
    if not s.constants_are_sub():
        return _na("constants are not subsolutions")
    sel = s.selection()
    lo = min(float(sol.u.min()) for sol in sel.solutions)
    st, measured, thr, _ = _le(sel.monotone_violation(), 1e-8)
    if lo < -1e-8:
        return FAIL, lo, -1e-8, "u_lambda went negative"
    return st, measured, thr, f"min u over ladder {lo:.3g}"


# -- selection ----------------------------------------------------------------

@check("selection", "u0_subsolution", "the selected limit is a critical subsolution")
def _u0_sub(s: Suite):
    return _le(is_subsolution(s.formula().u0, s.kernel()), s.cfg.tol_sel)


@check("selection", "u0_is_pointwise_min", "u0 is the minimum of the per-measure ratios")
def _u0_min(s: Suite):
    f = s.formula()
    return _le(float(np.max(f.u0[None, :] - f.ratios)), 0.0, "exact")


@check("selection", "ladder_gap_decreasing", "u_lambda converges to the selected limit")
def _gap_dec(s: Suite):
    gaps = [g for _, g in s.selection().per_lambda_gap]
    ok = gaps_decreasing(gaps)
    return (PASS if ok else FAIL), gaps[-4:], "each <= 1.1 x previous", "last four rungs"


@check("selection", "ladder_final_gap", "u_lambda converges to the selected limit")
def _gap_final(s: Suite):
    return _le(s.selection().final_gap, 0.1)


@check("selection", "u0_vs_oracle", "selected limit matches its analytic value")
def _u0_oracle(s: Suite):
    ctx = pipeline.run_critical(s.ctx)
    ref = ctx.oracle.limit(s.cfg.alpha, ctx.kernel.nodes)
    return _le(float(np.max(np.abs(s.formula().u0 - ref))), 0.1)


@check("selection", "baby_case_identity", "u0 = min over the Aubry set of h(a, .) when constants are subsolutions")
def _baby(s: Suite):
    if not s.constants_are_sub():
        return _na("constants are not subsolutions")
    baby = baby_case_formula(s.barrier(), s.ctx.aubry, s.cfg.tol_fp)
    return _le(float(np.max(np.abs(baby - s.formula().u0))), s.cfg.tol_sel)


@check("selection", "alpha_dependence", "u0 depends on alpha only through the Mather measures")
def _alpha_dep(s: Suite):
    bt = s.barrier()
    fam = s.family()
    u0 = s.formula().u0
    others = [u0_formula(bt, fam, a).u0 for a in s.alternatives()]
    if s.constants_are_sub():
        diff = max(float(np.max(np.abs(o - u0))) for o in others)
        return _le(diff, s.cfg.tol_sel, f"independent of alpha across {len(others) + 1} profiles")
    orc = pipeline.run_critical(s.ctx).oracle
    if s.cfg.model.family is not Family.ROTATION:
        return _na("no analytic offset for this model")
    nodes = s.kernel().nodes
    off = orc.weighted_offset(s.cfg.alpha, nodes)
    worst = 0.0
    for a, o in zip(s.alternatives(), others):
        delta = orc.weighted_offset(a, nodes) - off
        worst = max(worst, float(np.max(np.abs((u0 - o) - delta))))
    return _le(worst, 0.1, "table differences vs analytic offset differences")


@check("selection", "extreme_point_sufficiency", "a linear-fractional ratio is minimised at extreme measures")
def _extreme(s: Suite):
    fam = s.family()
    bt = s.barrier()
    u0 = s.formula().u0
    ms = fam.measures
    if len(ms) < 2:
        return _na("single extreme measure")
    worst = -np.inf
    for _ in range(100):
        w = s.rng.dirichlet(np.ones(len(ms)))
        mix = ms[0]
        acc = w[0]
        for m, wt in zip(ms[1:], w[1:]):
            acc += wt
            mix = mix.mix(m, wt / acc)
        worst = max(worst, float(np.max(u0 - ratio_for_measure(bt, mix, s.cfg.alpha))))
    return _le(worst, 1e-10, "100 random mixtures")


@check("selection", "constraint_u0", "the limit satisfies the Mather constraint")
def _constraint_u0(s: Suite):
    return _le(constraint_check(s.formula().u0, s.family(), s.cfg.alpha), s.cfg.tol_sel)


@check("selection", "constraint_final_rung", "the limit satisfies the Mather constraint")
def _constraint_rung(s: Suite):
    sel = s.selection()
    k = s.kernel()
    node = constraint_check(sel.u0_ladder, s.family(), s.cfg.alpha)
    if node <= s.cfg.tol_sel:
        return PASS, node, s.cfg.tol_sel, ""
    edge = constraint_check(sel.u0_ladder, s.family(), s.cfg.alpha, k, "edge")
    u0_edge = u0_formula(s.barrier(), s.family(), s.cfg.alpha, "edge").u0
    bias = float(np.max(np.abs(u0_edge - s.formula().u0)))
    mass = max(float(np.sum(eval_alpha(s.cfg.alpha, k.nodes) * m.node_weights)) for m in s.family().measures)
    if edge <= s.cfg.tol_sel and node <= s.cfg.tol_sel + mass * bias:
        return (WARN, node, s.cfg.tol_sel,
                f"node-weighted value exceeds tol_sel by an O(dt) weighting bias ({bias:.3g}); "
                f"edge-weighted value {edge:.3g} passes")
    return FAIL, node, s.cfg.tol_sel, f"edge-weighted value {edge:.3g}"


@check("selection", "constraint_final_rung_edge", "the limit satisfies the Mather constraint")
def _constraint_rung_edge(s: Suite):
    sel = s.selection()
    return _le(constraint_check(sel.u0_ladder, s.family(), s.cfg.alpha, s.kernel(), "edge"), s.cfg.tol_sel,
               "abar on incoming edges, the weighting the discounted scheme converges to")


# -- cli ----------------------------------------------------------------------

@check("cli", "deterministic_rerun", "identical config gives byte-identical tables")
def _rerun(s: Suite):
    base = s.ctx.out
    names = ["critical", "barrier", "aubry", "mather"]
    pipeline.run_mather(s.ctx)
    with tempfile.TemporaryDirectory() as tmp:
        cfg = dataclasses.replace(s.cfg, out_dir=Path(tmp), tables=tuple(names))
        ctx = pipeline.Context(cfg)
        pipeline.run_barrier(ctx, reuse=False)
        pipeline.run_mather(ctx)
        diff = [n for n in names if (base / f"{n}.csv").exists() and
                not filecmp.cmp(base / f"{n}.csv", Path(tmp) / f"{n}.csv", shallow=False)]
        missing = [n for n in names if not (base / f"{n}.csv").exists()]
    return _le(len(diff), 0, f"differing: {diff}; not written: {missing}")


def run_suite(ctx: pipeline.Context):
    suite = Suite(ctx)
    results = []
    for module, name, anchor, fn in REGISTRY:
        try:
            status, measured, threshold, detail = fn(suite)
        except (ConvergenceError, PreconditionError) as exc:
            status, measured, threshold, detail = FAIL, None, None, f"{type(exc).__name__}: {exc}"
        except Exception as exc:  # a broken check must not hide the rest of the report
            logger.exception("check %s crashed", name)
            status, measured, threshold, detail = FAIL, None, None, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, module, status, measured, threshold, anchor, detail))
        logger.info("%-5s %s.%s", status, module, name)
    registered = {(m, n) for m, n, _, _ in REGISTRY}
    produced = {(r.module, r.name) for r in results}
    results.append(CheckResult("report_exhaustive", "cli", PASS if registered == produced else FAIL,
                               len(produced), len(registered), "every registered invariant is reported"))
    return results
