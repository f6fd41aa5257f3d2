"""Critical value by minimum mean cycle, critical graph and discrete Mather measures.

On the grid a closed probability measure is a normalised divergence-free
edge flow.  The minimal mean running cost over such flows is attained at
uniform measures on simple cycles, so the discrete critical value is
``c_grid = -mu_star / dt`` with ``mu_star`` the minimum cycle mean of the raw
kernel, and Mather measures are enumerated as cycles of the tight graph.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DiagnosticError
from .lattice import CostKernel, circular_distance

logger = logging.getLogger(__name__)

MAX_MEASURES = 64


@dataclass(frozen=True)
class MeanCycleResult:
    mu_star: float
    witness: tuple  # ((j, k), ...) in traversal order, starting at the smallest node
    karp_value: float

    @property
    def nodes(self):
        return tuple(j for j, _ in self.witness)


def cycle_mean(kernel: CostKernel, edges):
    return math.fsum(kernel.edge_cost(j, k) for j, k in edges) / len(edges)


def _canonical(edges):
    m = min(range(len(edges)), key=lambda r: edges[r][0])
    return tuple(edges[m:] + edges[:m])


def _walk_cycles(walk_nodes, walk_steps):
    """Split a walk into the simple cycles it contains (cycle cancelling)."""
    cycles = []
    stack_nodes = [walk_nodes[0]]
    stack_steps = []
    pos = {walk_nodes[0]: 0}
    for node, k in zip(walk_nodes[1:], walk_steps):
        stack_nodes.append(node)
        stack_steps.append(k)
        if node in pos:
            start = pos[node]
            seq = stack_nodes[start:]
            steps = stack_steps[start:]
            cycles.append([(seq[r], steps[r]) for r in range(len(steps))])
            for dropped in stack_nodes[start + 1:]:
                pos.pop(dropped, None)
            del stack_nodes[start + 1:]
            del stack_steps[start:]
        else:
            pos[node] = len(stack_nodes) - 1
    return cycles


def min_mean_cycle(kernel: CostKernel) -> MeanCycleResult:
    """Karp's dynamic program over walks of length 0..N from a virtual source.

    The returned ``mu_star`` is the exact (fsum) mean of the extracted
    witness cycle; ``karp_value`` is the dynamic-programming estimate.
    """
    N, K = kernel.N, kernel.K
    cost = kernel.cost
    D = np.zeros((N + 1, N))
    parent = np.zeros((N + 1, N), dtype=np.int64)
    for n in range(1, N + 1):
        cand = np.stack([np.roll(D[n - 1] + cost[:, kk], kk - K) for kk in range(2 * K + 1)])
        arg = np.argmin(cand, axis=0)
        D[n] = cand[arg, np.arange(N)]
        parent[n] = arg - K
    ratios = np.stack([(D[N] - D[k]) / (N - k) for k in range(N)])
    per_node = ratios.max(axis=0)
    target = int(np.argmin(per_node))
    karp = float(per_node[target])

    nodes = [target]
    steps = []
    node = target
    for n in range(N, 0, -1):
        k = int(parent[n, node])
        steps.append(k)
        node = (node - k) % N
        nodes.append(node)
    # forward order: nodes[-1] -> ... -> nodes[0]
    fwd_nodes = nodes[::-1]
    fwd_steps = steps[::-1]
    cycles = _walk_cycles(fwd_nodes, fwd_steps)
    if not cycles:
        raise DiagnosticError("Karp walk contained no cycle")
    best = min(cycles, key=lambda cyc: (cycle_mean(kernel, cyc), len(cyc)))
    witness = _canonical(best)
    mu = cycle_mean(kernel, witness)
    scale = max(1.0, abs(karp))
    if abs(mu - karp) > 1e-12 * scale:
        logger.warning("Karp witness mean %.17g differs from DP value %.17g", mu, karp)
    return MeanCycleResult(mu_star=mu, witness=witness, karp_value=karp)


def critical_value(kernel: CostKernel) -> float:
    """c_grid such that the kernel rebuilt with c = c_grid has minimum cycle mean 0."""
    return kernel.c - min_mean_cycle(kernel).mu_star / kernel.dt


# -- measures --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteClosedMeasure:
    N: int
    edges: tuple  # ((j, k), ...)
    weights: np.ndarray

    @classmethod
    def uniform_cycle(cls, N, edges):
        edges = tuple((int(j), int(k)) for j, k in edges)
        w = np.full(len(edges), 1.0 / len(edges))
        w.setflags(write=False)
        return cls(N, edges, w)

    @property
    def node_weights(self):
        nu = np.zeros(self.N)
        for (j, _), w in zip(self.edges, self.weights):
            nu[j] += w
        return nu

    @property
    def support(self):
        return sorted({j for (j, _), w in zip(self.edges, self.weights) if w > 0})

    def mix(self, other, t):
        """(1 - t) * self + t * other."""
        acc = {}
        for e, w in zip(self.edges, self.weights):
            acc[e] = acc.get(e, 0.0) + (1 - t) * w
        for e, w in zip(other.edges, other.weights):
            acc[e] = acc.get(e, 0.0) + t * w
        edges = tuple(sorted(acc))
        return DiscreteClosedMeasure(self.N, edges, np.array([acc[e] for e in edges]))

    def mean_cost(self, kernel: CostKernel):
        return math.fsum(w * kernel.edge_cost(j, k) for (j, k), w in zip(self.edges, self.weights))

    def mean_running_cost(self, kernel: CostKernel):
        """Integral of L against the measure (raw cost per unit time)."""
        return math.fsum(w * kernel.lagrangian[j, k + kernel.K] for (j, k), w in zip(self.edges, self.weights))


@dataclass
class MatherFamily:
    measures: list
    c_grid: float
    capped: bool = False
    diagnostics: list = field(default_factory=list)


def check_closed(measure: DiscreteClosedMeasure) -> float:
    """Largest |inflow - outflow| over nodes."""
    div = np.zeros(measure.N)
    for (j, k), w in zip(measure.edges, measure.weights):
        div[j] -= w
        div[(j + k) % measure.N] += w
    return float(np.max(np.abs(div)))


# -- tight graph ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TightGraph:
    kernel: CostKernel
    edges: tuple  # ((j, k), ...) sorted
    tol: float


def tight_graph(kernel_c: CostKernel, potential, tol_tight: float) -> TightGraph:
    """Edges on which the subsolution inequality u(i) - u(j) <= cost(j, k) is an equality."""
    u = np.asarray(potential, dtype=float)
    slack = u[:, None] + kernel_c.cost - u[kernel_c.targets]
    js, kks = np.nonzero(np.abs(slack) <= tol_tight)
    edges = tuple((int(j), int(kk) - kernel_c.K) for j, kk in zip(js, kks))
    if not edges:
        raise DiagnosticError("tight graph is empty")
    return TightGraph(kernel_c, edges, tol_tight)


def extreme_measures(tight: TightGraph, L_max: int, max_measures=MAX_MEASURES,
                     max_candidates=4096, max_expansions=2_000_000) -> MatherFamily:
    """Uniform measures on simple tight cycles of length <= L_max, shortest first."""
    kernel = tight.kernel
    N = kernel.N
    src = np.array([j for j, _ in tight.edges])
    dst = np.array([(j + k) % N for j, k in tight.edges])
    graph = csr_matrix((np.ones(len(src)), (src, dst)), shape=(N, N))
    _, comp = connected_components(graph, directed=True, connection="strong")
    out = [[] for _ in range(N)]
    for j, k in tight.edges:
        i = (j + k) % N
        if comp[i] == comp[j]:
            out[j].append((k, i))

    found = []
    expansions = 0
    exhausted = False
    for s in range(N):
        if not out[s]:
            continue
        path = []
        on_path = {s}
        stack = [iter(out[s])]
        while stack:
            if len(found) >= max_candidates or expansions >= max_expansions:
                exhausted = True
                break
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                if path:
                    on_path.discard((path[-1][0] + path[-1][1]) % N)
                    path.pop()
                continue
            k, i = nxt
            expansions += 1
            cur = (path[-1][0] + path[-1][1]) % N if path else s
            if i == s:
                found.append(tuple(path + [(cur, k)]))
                continue
            if i < s or i in on_path or len(path) + 1 >= L_max:
                continue
            path.append((cur, k))
            on_path.add(i)
            stack.append(iter(out[i]))
        if exhausted:
            break

    found.sort(key=lambda cyc: (len(cyc), cyc))
    diagnostics = []
    capped = exhausted or len(found) > max_measures
    if capped:
        msg = f"cycle enumeration capped ({len(found)} candidates, limit {max_measures}); family may be incomplete"
        logger.warning(msg)
        diagnostics.append(msg)
    measures = [DiscreteClosedMeasure.uniform_cycle(N, cyc) for cyc in found[:max_measures]]
    if not measures:
        raise DiagnosticError(f"no tight cycle of length <= {L_max}")
    c_grid = kernel.c
    return MatherFamily(measures, c_grid, capped, diagnostics)


def mather_in_aubry(family: MatherFamily, aubry_nodes):
    """Every source node with positive mass lies within one cell of the Aubry nodes."""
    aubry = sorted(set(int(a) for a in aubry_nodes))
    offending = []
    support = set()
    for m in family.measures:
        for j in m.support:
            support.add(j)
            if not any(circular_distance(j, a, m.N) <= 1 for a in aubry):
                offending.append(j)
    report = {"support": sorted(support), "offending": sorted(set(offending)), "aubry_count": len(aubry)}
    return not offending, report
