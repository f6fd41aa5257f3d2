"""Degenerate discounted Bellman operator and its fixed point.

One step of the discrete representation formula::

    (T_lam u)(i) = min_k  exp(-lam dt abar(j, i)) * (u(j) + cost(j, k)),
    j = (i - k) mod N,  abar(j, i) = (alpha(x_j) + alpha(x_i)) / 2.

The discount multiplies the whole bracket, so the operator is a min of
monotone affine maps: monotone and nonexpansive in sup norm, contracting
only along edges where alpha > 0.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .barrier import BarrierTable, aubry_nodes
from .errors import ConvergenceError, PreconditionError
from .lattice import CostKernel
from .model import AlphaProfile, eval_alpha

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 10**6


def edge_alpha(kernel: CostKernel, alpha: AlphaProfile):
    """abar on every (j, k) edge."""
    a = eval_alpha(alpha, kernel.nodes)
    return 0.5 * (a[:, None] + a[kernel.targets])


def discount_table(kernel: CostKernel, alpha: AlphaProfile, lam: float):
    rate = lam * edge_alpha(kernel, alpha)
    return np.exp(-kernel.dt * rate)


def discounted_step(kernel_c: CostKernel, alpha: AlphaProfile, lam: float, u):
    u = np.asarray(u, dtype=float)
    disc = discount_table(kernel_c, alpha, lam)
    out = np.empty_like(u)
    pol = np.empty(u.shape[0], dtype=np.int64)
    _kernels.discounted_apply(kernel_c.cost, disc, u, kernel_c.K, out, pol)
    return out


@dataclass(frozen=True, eq=False)
class DiscountedSolution:
    u: np.ndarray
    lam: float
    alpha: AlphaProfile
    policy: np.ndarray
    iterations: int
    residual: float
    kernel: CostKernel
    disc: np.ndarray
    trace: list = field(default_factory=list)


def check_alpha_on_aubry(alpha: AlphaProfile, kernel: CostKernel, aubry):
    vals = eval_alpha(alpha, kernel.nodes[list(aubry)])
    if np.any(vals <= 0.0):
        bad = [int(a) for a, v in zip(aubry, vals) if v <= 0.0]
        raise PreconditionError(f"alpha vanishes on Aubry set (nodes {bad[:8]})")
    return float(vals.min())


def _iterate(kernel, disc, u0, tol_fp, max_iter, cost=None):
    cost = kernel.cost if cost is None else cost
    trace_every = max(1, max_iter // 1000)
    u, iters, res, trace = _kernels.value_iteration(
        np.ascontiguousarray(cost), np.ascontiguousarray(disc), np.array(u0, dtype=float),
        kernel.K, tol_fp, max_iter, trace_every)
    if not res < tol_fp:
        raise ConvergenceError(
            f"discounted iteration hit max_iter={max_iter} with residual {res:.3g} > {tol_fp:.3g}", trace)
    # policy and final residual against the returned iterate
    nxt = np.empty_like(u)
    pol = np.empty(u.shape[0], dtype=np.int64)
    final_res = _kernels.discounted_apply(cost, disc, u, kernel.K, nxt, pol)
    return u, pol, iters, final_res, list(trace)


def solve_discounted(kernel_c: CostKernel, alpha: AlphaProfile, lam: float, *, barrier: BarrierTable | None = None,
                     aubry=None, tol_fp: float = 1e-10, max_iter: int = DEFAULT_MAX_ITER,
                     warm_start=None, tol_aubry=None) -> DiscountedSolution:
    """Fixed point of T_lam by value iteration.

    The Aubry nodes come from ``aubry`` or are read off ``barrier``; alpha must
    be positive on all of them.  Without ``warm_start`` the iteration starts
    from a barrier row h(a, .) normalised to min 0.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if aubry is None:
        if barrier is None:
            raise ValueError("need the Aubry nodes or a barrier table to check alpha positivity")
        aubry = aubry_nodes(barrier, tol_aubry)
    check_alpha_on_aubry(alpha, kernel_c, aubry)
    if warm_start is None:
        if barrier is not None:
            row = np.array(barrier.h[min(aubry)], dtype=float)
            warm_start = row - row.min()
        else:
            warm_start = np.zeros(kernel_c.N)
    disc = discount_table(kernel_c, alpha, lam)
    u, pol, iters, res, trace = _iterate(kernel_c, disc, warm_start, tol_fp, max_iter)
    u.setflags(write=False)
    pol.setflags(write=False)
    disc.setflags(write=False)
    logger.debug("lambda=%g: %d iterations, residual %.3g", lam, iters, res)
    return DiscountedSolution(u, float(lam), alpha, pol, iters, res, kernel_c, disc, trace)


def solve_time_changed(kernel_c: CostKernel, alpha: AlphaProfile, lam: float, *, tol_fp: float = 1e-10,
                       max_iter: int = DEFAULT_MAX_ITER, warm_start=None):
    """Uniformly discounted solve of the alpha-rescaled problem (alpha > 0 everywhere).

    Dividing the equation by alpha gives lam u + (H - c)/alpha = 0.  On the grid
    this is a kernel whose edges last dt * abar and whose running cost per
    unit time is cost / (dt * abar), discounted at the uniform rate lam.
    """
    abar = edge_alpha(kernel_c, alpha)
    if np.any(abar <= 0):
        raise PreconditionError("time change needs alpha > 0 everywhere")
    duration = kernel_c.dt * abar
    running = kernel_c.cost / duration
    disc = np.exp(-lam * duration)
    u0 = np.zeros(kernel_c.N) if warm_start is None else warm_start
    u, _, iters, res, _ = _iterate(kernel_c, disc, u0, tol_fp, max_iter, cost=running * duration)
    return u, iters, res


# -- trajectories --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryReport:
    path: np.ndarray  # node indices, path[0] = start, going backward in time
    steps: np.ndarray  # steps[m] is the k used from path[m + 1] to path[m]
    value_recomputed: float
    discount_products: np.ndarray  # product of the first m factors, m = 0..n
    alpha_values: np.ndarray  # alpha at each visited node

    def excursion_gaps(self, epsilon):
        """Lengths of the maximal runs of nodes with alpha <= epsilon."""
        gaps = []
        run = 0
        for a in self.alpha_values:
            if a <= epsilon:
                run += 1
            else:
                if run:
                    gaps.append(run)
                run = 0
        if run:
            gaps.append(run)
        return gaps


def backward_trajectory(sol: DiscountedSolution, start: int, n_steps: int) -> TrajectoryReport:
    """Follow the optimal policy backward and rebuild u(start) from the running costs."""
    kern = sol.kernel
    N, K = kern.N, kern.K
    path = [int(start)]
    steps = []
    factors = []
    costs = []
    node = int(start)
    for _ in range(n_steps):
        k = int(sol.policy[node])
        j = (node - k) % N
        steps.append(k)
        factors.append(sol.disc[j, k + K])
        costs.append(kern.cost[j, k + K])
        path.append(j)
        node = j
    prod = np.concatenate(([1.0], np.cumprod(factors))) if factors else np.array([1.0])
    # u(i_0) = sum_m P_m * d_m * c_m + P_n * u(i_n),  P_m = prod_{l < m} d_l
    terms = [prod[m] * factors[m] * costs[m] for m in range(n_steps)]
    value = math.fsum(terms + [prod[-1] * float(sol.u[path[-1]])])
    if n_steps == 0:
        value = float(sol.u[start])
    alpha_vals = eval_alpha(sol.alpha, kern.nodes[path])
    return TrajectoryReport(np.array(path), np.array(steps, dtype=int), value, prod, alpha_vals)


def excursion_stat(report: TrajectoryReport, alpha: AlphaProfile | None = None, epsilon: float = 0.0,
                   N: int | None = None) -> int:
    """Longest run of consecutive steps spent where alpha <= epsilon.

    If ``alpha`` is given it is re-evaluated on the path (``N`` nodes);
    otherwise the values stored in the report are used.
    """
    if len(report.path) < 101:
        raise ValueError("excursion statistics need a trajectory of at least 100 steps")
    if alpha is not None:
        if N is None:
            raise ValueError("N is needed to place the path nodes")
        vals = eval_alpha(alpha, np.asarray(report.path) / N)
        report = TrajectoryReport(report.path, report.steps, report.value_recomputed,
                                  report.discount_products, vals)
    return max(report.excursion_gaps(epsilon), default=0)


def write_solution_csv(path, sol: DiscountedSolution):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_index", "x", "u", "policy_k"])
        for i in range(sol.kernel.N):
            w.writerow([i, repr(float(sol.kernel.nodes[i])), repr(float(sol.u[i])), int(sol.policy[i])])


def write_trajectory_csv(path, report: TrajectoryReport, N: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "node_index", "x", "alpha", "discount_product"])
        for m, j in enumerate(report.path):
            w.writerow([m, int(j), repr(float(j / N)), repr(float(report.alpha_values[m])),
                        repr(float(report.discount_products[m]))])


def policy_paths(sol: DiscountedSolution, starts, n_steps: int):
    """Backward policy paths for many start nodes at once; shape (len(starts), n_steps + 1)."""
    N = sol.kernel.N
    paths = np.empty((len(starts), n_steps + 1), dtype=np.int64)
    paths[:, 0] = starts
    for m in range(n_steps):
        cur = paths[:, m]
        paths[:, m + 1] = (cur - sol.policy[cur]) % N
    return paths


def max_excursion(paths, alpha_nodes, epsilon):
    """Longest run along any path of consecutive nodes with alpha <= epsilon."""
    low = alpha_nodes[paths] <= epsilon
    run = np.zeros(paths.shape[0], dtype=np.int64)
    best = 0
    for m in range(paths.shape[1]):
        run = np.where(low[:, m], run + 1, 0)
        best = max(best, int(run.max()))
    return best


def ladder_bounds(solutions):
    """Per-rung sup norm and one-cell Lipschitz constant (difference / dx)."""
    out = []
    for sol in solutions:
        du = np.abs(np.roll(sol.u, -1) - sol.u)
        out.append((sol.lam, float(np.max(np.abs(sol.u))), float(du.max() * sol.kernel.N)))
    return out


def lipschitz_bound(kernel_c: CostKernel, alpha: AlphaProfile, lam_max: float, sup_u: float):
    """Bound on the one-cell Lipschitz constant of any discounted fixed point.

    From u(i) <= d (u(i -/+ 1) + cost) with 0 < d <= 1:
    |u(i + 1) - u(i)| <= max one-cell cost + (1 - d_min) sup|u|.
    """
    K = kernel_c.K
    one_cell = max(0.0, float(np.max(kernel_c.cost[:, [K - 1, K + 1]])))
    dmin = float(np.exp(-lam_max * kernel_c.dt * np.max(edge_alpha(kernel_c, alpha))))
    return (one_cell + (1 - dmin) * sup_u) * kernel_c.N
