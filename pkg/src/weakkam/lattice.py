"""Periodic grid and the one-step action kernel.

A kernel stores, for every source node ``j`` and signed step ``k`` with
``|k| <= K``, the cost of jumping from ``x_j`` to ``x_{(j+k) mod N}`` in one
time step ``dt``::

    cost[j, k + K] = dt * (L(x_j, k / (N dt)) + c)

Min-plus composition of this table is the discrete Lax-Oleinik semigroup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import SENTINEL
from .model import ModelSpec, eval_L

QUADRATURES = ("source", "midpoint")


@dataclass(frozen=True)
class Grid:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8:
            raise ValueError(f"grid needs an integer N >= 8, got {self.N}")

    @property
    def dx(self):
        return 1.0 / self.N

    @property
    def nodes(self):
        return np.arange(self.N) / self.N


def displacement(j, i, N):
    """Signed representative of (i - j) mod N with smallest modulus; N/2 maps to +N/2."""
    k = (i - j) % N
    if 2 * k > N:
        k -= N
    return k


def circular_distance(j, i, N):
    return abs(displacement(j, i, N))


@dataclass(frozen=True, eq=False)
class CostKernel:
    """One-step cost table of shape (N, 2K + 1).

    ``lagrangian`` holds the running cost L(x_j, v_k) so the additive constant
    can be swapped without re-evaluating the model.
    """

    N: int
    K: int
    dt: float
    c: float
    lagrangian: np.ndarray
    cost: np.ndarray
    model: ModelSpec | None = None
    quadrature: str = "source"

    @property
    def steps(self):
        return np.arange(-self.K, self.K + 1)

    @property
    def velocities(self):
        return self.steps / (self.N * self.dt)

    @property
    def nodes(self):
        return np.arange(self.N) / self.N

    @property
    def targets(self):
        """targets[j, k + K] = (j + k) mod N."""
        return (np.arange(self.N)[:, None] + self.steps[None, :]) % self.N

    def edges(self):
        """(source, step) pairs in (j, k) lexicographic order."""
        return [(j, k) for j in range(self.N) for k in range(-self.K, self.K + 1)]

    def edge_cost(self, j, k):
        return float(self.cost[j, k + self.K])

    def with_constant(self, c):
        return _make_kernel(self.N, self.K, self.dt, float(c), self.lagrangian, self.model, self.quadrature)

    @classmethod
    def from_table(cls, cost, dt=1.0, c=0.0):
        """Wrap an arbitrary finite (N, 2K + 1) cost table (toy instances, tests)."""
        cost = np.array(cost, dtype=float)
        if cost.ndim != 2 or cost.shape[1] % 2 != 1:
            raise ValueError("cost table must have shape (N, 2K + 1)")
        if not np.all(np.isfinite(cost)):
            raise ValueError("cost table must be finite")
        n, width = cost.shape
        lag = cost / dt - c
        return _make_kernel(n, width // 2, float(dt), float(c), lag, None, "source", cost=cost)


def _make_kernel(N, K, dt, c, lagrangian, model, quadrature, cost=None):
    lagrangian = np.array(lagrangian, dtype=float)
    if cost is None:
        cost = dt * (lagrangian + c)
    cost = np.array(cost, dtype=float)
    lagrangian.setflags(write=False)
    cost.setflags(write=False)
    return CostKernel(N, K, dt, c, lagrangian, cost, model, quadrature)


def build_kernel(grid: Grid, model: ModelSpec, K: int, dt: float, c: float, quadrature: str = "source") -> CostKernel:
    if not 1 <= K <= grid.N // 4:
        raise ValueError(f"half-bandwidth K must satisfy 1 <= K <= N/4, got K={K}, N={grid.N}")
    if not dt > 0:
        raise ValueError("time step dt must be positive")
    if quadrature not in QUADRATURES:
        raise ValueError(f"quadrature must be one of {QUADRATURES}")
    steps = np.arange(-K, K + 1)
    v = steps / (grid.N * dt)
    x = grid.nodes[:, None]
    if quadrature == "midpoint":
        x = x + 0.5 * steps[None, :] / grid.N
    lag = eval_L(model, x, v[None, :]) * np.ones((grid.N, 1))
    return _make_kernel(grid.N, K, float(dt), float(c), lag, model, quadrature)


def one_step_min(kernel: CostKernel, u):
    """(Tu)(i) = min over k of u(j) + cost(j, k), j = (i - k) mod N."""
    u = np.asarray(u, dtype=float)
    best, _ = _step_with_argmin(kernel.cost, u, kernel.K)
    return best


def one_step_argmin(kernel: CostKernel, u):
    """Like one_step_min but also returns the minimising step k per node (smallest k on ties)."""
    best, arg = _step_with_argmin(kernel.cost, np.asarray(u, dtype=float), kernel.K)
    return best, arg - kernel.K


def _step_with_argmin(cost, u, K):
    cand = np.stack([np.roll(u + cost[:, kk], kk - K) for kk in range(2 * K + 1)])
    arg = np.argmin(cand, axis=0)
    return cand[arg, np.arange(u.shape[0])], arg


def densify(kernel: CostKernel):
    """Dense N x N one-step table A[j, i]; missing edges carry SENTINEL."""
    A = np.full((kernel.N, kernel.N), SENTINEL)
    tgt = kernel.targets
    for kk in range(2 * kernel.K + 1):
        rows = np.arange(kernel.N)
        A[rows, tgt[:, kk]] = np.minimum(A[rows, tgt[:, kk]], kernel.cost[:, kk])
    return A
