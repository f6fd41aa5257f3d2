"""Min-plus semigroup engine: action tables, Peierls barrier, Aubry set.

With ``A`` the dense one-step table of a kernel at ``c = c_grid``, the n-step
action is the min-plus power ``A^n``.  The barrier is its liminf.  Powers of
a critical table are only eventually *periodic* (period = cyclicity of the
critical graph, 64 for the rotation family), so the liminf is evaluated
through the identity::

    liminf_n A^n(j, i) = min over critical a of  A+(j, a) + A+(a, i)

where ``A+ = min_{n >= 1} A^n`` and a node is critical when ``A+(a, a) = 0``.
``A+`` is obtained by repeated squaring of the running minimum
``S <- min(S, S (x) S)``, which after ``s`` stages covers horizons 1..2^s.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import SENTINEL
from .errors import ConvergenceError, DiagnosticError
from .lattice import CostKernel, densify, one_step_min

logger = logging.getLogger(__name__)

MAX_SQUARINGS = 64


def tropical_product(A, B):
    return _kernels.minplus(np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(B, dtype=float))


def tropical_square(A):
    """B(j, i) = min_m A(j, m) + A(m, i)."""
    return tropical_product(A, A)


def tropical_identity(n):
    E = np.full((n, n), SENTINEL)
    np.fill_diagonal(E, 0.0)
    return E


def h_steps(kernel_c: CostKernel, n: int):
    """n-fold min-plus power of the dense one-step table, by binary powering."""
    if n < 1:
        raise ValueError("n must be >= 1")
    base = densify(kernel_c)
    result = None
    while n:
        if n & 1:
            result = base.copy() if result is None else tropical_product(result, base)
        n >>= 1
        if n:
            base = tropical_square(base)
    return result


def default_tol_h(N):
    return 1e-9 * N


@dataclass(frozen=True, eq=False)
class BarrierTable:
    h: np.ndarray
    steps_used: int
    residual: float
    kernel: CostKernel
    plus: np.ndarray  # min over all horizons n >= 1 of A^n
    critical: tuple
    trace: list = field(default_factory=list)

    @property
    def N(self):
        return self.h.shape[0]

    @property
    def diagonal(self):
        return np.diag(self.h).copy()


def peierls(kernel_c: CostKernel, tol_h=None, window: int = 4, tol_critical=None) -> BarrierTable:
    """Discrete Peierls barrier of a kernel built with c = c_grid.

    Squaring stops once the sup change of the running minimum stays below
    ``tol_h`` for ``window`` consecutive stages.  Nodes with
    ``A+(a, a) <= tol_critical`` (default ``10 * tol_h``) are critical.
    """
    N = kernel_c.N
    tol_h = default_tol_h(N) if tol_h is None else tol_h
    tol_critical = 10 * tol_h if tol_critical is None else tol_critical
    if window < 1:
        raise ValueError("window must be >= 1")
    S = densify(kernel_c)
    trace = []
    quiet = 0
    stage = 0
    while True:
        if stage >= MAX_SQUARINGS:
            raise ConvergenceError(f"Peierls barrier did not converge in {MAX_SQUARINGS} squarings", trace)
        nxt = np.minimum(S, tropical_square(S))
        change = float(np.max(np.abs(nxt - S)))
        S = nxt
        stage += 1
        trace.append(change)
        quiet = quiet + 1 if change < tol_h else 0
        if quiet >= window:
            break
    if np.max(S) >= 1e15:
        raise DiagnosticError("barrier still has unreachable entries after convergence")
    critical = np.nonzero(np.diag(S) <= tol_critical)[0]
    if critical.size == 0:
        raise DiagnosticError("no critical node: min cycle mean is not ~0 (kernel c is not c_grid?)")
    h = tropical_product(S[:, critical], S[critical, :])
    h.setflags(write=False)
    S.setflags(write=False)
    logger.debug("peierls: %d squarings, %d critical nodes, residual %.3g", stage, critical.size, change)
    return BarrierTable(h, stage, change, kernel_c, S, tuple(int(a) for a in critical), trace)


def aubry_nodes(bt: BarrierTable, tol_aubry=None):
    tol_aubry = 10 * default_tol_h(bt.N) if tol_aubry is None else tol_aubry
    nodes = [int(j) for j in np.nonzero(bt.diagonal <= tol_aubry)[0]]
    if not nodes:
        raise DiagnosticError("Aubry set is empty")
    return nodes


@dataclass(frozen=True, eq=False)
class WeakKamSolution:
    u: np.ndarray
    base: int
    shift: float = 0.0  # u = h(base, .) + shift
    residual: float = 0.0


def fixed_point_residual(kernel: CostKernel, u):
    u = np.asarray(u, dtype=float)
    return float(np.max(np.abs(one_step_min(kernel, u) - u)))


def weak_kam_row(bt: BarrierTable, base: int, tol_fp: float = 1e-10, shift: float = 0.0) -> WeakKamSolution:
    """u = h(base, .) + shift, checked to be a fixed point of the one-step operator."""
    u = np.array(bt.h[base], dtype=float) + shift
    res = fixed_point_residual(bt.kernel, u)
    if res > tol_fp:
        raise DiagnosticError(f"h({base}, .) has fixed-point residual {res:.3g} > {tol_fp:.3g}")
    u.setflags(write=False)
    return WeakKamSolution(u, int(base), shift, res)


def is_subsolution(u, kernel_c: CostKernel) -> float:
    """max over edges of u(i) - u(j) - cost(j, k); <= 0 for a discrete subsolution."""
    u = np.asarray(u, dtype=float)
    return float(np.max(u[kernel_c.targets] - u[:, None] - kernel_c.cost))


def comparison_check(sub, sup, aubry, tol=1e-9) -> bool:
    """If sub <= sup on the Aubry nodes then sub <= sup + tol everywhere."""
    sub = np.asarray(sub, dtype=float)
    sup = np.asarray(sup, dtype=float)
    aubry = list(aubry)
    if np.any(sub[aubry] > sup[aubry] + tol):
        return True  # hypothesis fails, implication holds vacuously
    return bool(np.all(sub <= sup + tol))
