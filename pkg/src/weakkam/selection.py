"""Selected vanishing-discount limit.

Two routes to the same table: the measure formula

    u0(i) = min over Mather measures mu of
            sum_j alpha_j h(j, i) nu_j / sum_j alpha_j nu_j

and the last rung of a ladder of discounted solutions with lambda -> 0.
The ratio is linear-fractional in mu, so minimising over the extreme
(cycle) measures is enough.

``weighting="node"`` uses alpha at the source nodes of the measure, as in
the continuous formula.  ``weighting="edge"`` puts the edge average abar on
the edge's target node instead.  That is the exact first-order expansion of
the discounted scheme, so the ladder converges to it at rate O(lambda),
while the node-weighted table differs from it by O(dt).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .barrier import BarrierTable, aubry_nodes, is_subsolution
from .criticality import MatherFamily
from .discounted import DEFAULT_MAX_ITER, edge_alpha, solve_discounted
from .errors import PreconditionError
from .lattice import CostKernel
from .model import AlphaProfile, eval_alpha

logger = logging.getLogger(__name__)

MIN_LAMBDA = 1e-4
DENOM_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class FormulaResult:
    u0: np.ndarray
    chosen: np.ndarray  # argmin measure index per node, lowest index on ties
    ratios: np.ndarray  # (n_measures, N): one ratio row per measure
    alpha_mass: np.ndarray


WEIGHTINGS = ("node", "edge")


def measure_weights(measure, alpha: AlphaProfile, kernel: CostKernel, weighting="node"):
    """Per-node alpha mass carried by a closed measure under the chosen weighting."""
    if weighting == "node":
        return eval_alpha(alpha, kernel.nodes) * measure.node_weights
    if weighting != "edge":
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    abar = edge_alpha(kernel, alpha)
    out = np.zeros(kernel.N)
    for (j, k), w in zip(measure.edges, measure.weights):
        out[(j + k) % kernel.N] += w * abar[j, k + kernel.K]
    return out


def u0_formula(bt: BarrierTable, family: MatherFamily, alpha: AlphaProfile, weighting="node") -> FormulaResult:
    rows = []
    masses = []
    for idx, m in enumerate(family.measures):
        weight = measure_weights(m, alpha, bt.kernel, weighting)
        mass = float(weight.sum())
        if not mass > DENOM_FLOOR:
            raise PreconditionError(f"alpha vanishes on a Mather support (measure {idx}, alpha mass {mass:.3g})")
        rows.append(weight @ bt.h / mass)
        masses.append(mass)
    ratios = np.vstack(rows)
    chosen = np.argmin(ratios, axis=0)
    u0 = ratios[chosen, np.arange(bt.N)]
    return FormulaResult(u0, chosen, ratios, np.array(masses))


def ratio_for_measure(bt: BarrierTable, measure, alpha: AlphaProfile, weighting="node"):
    """Ratio row for an arbitrary (possibly mixed) closed measure."""
    weight = measure_weights(measure, alpha, bt.kernel, weighting)
    return weight @ bt.h / weight.sum()


def constraint_check(u, family: MatherFamily, alpha: AlphaProfile, kernel: CostKernel | None = None,
                     weighting="node") -> float:
    """max over measures of sum_j alpha_j u_j nu_j; <= 0 for members of the constrained set."""
    u = np.asarray(u, dtype=float)
    if weighting == "node":
        a = eval_alpha(alpha, np.arange(u.shape[0]) / u.shape[0])
        return max(float((a * u) @ m.node_weights) for m in family.measures)
    if kernel is None:
        raise ValueError("edge weighting needs the kernel")
    return max(float(measure_weights(m, alpha, kernel, weighting) @ u) for m in family.measures)


def baby_case_formula(bt: BarrierTable, aubry=None, tol: float = 1e-10):
    """min over Aubry nodes a of h(a, .), valid when constants are subsolutions."""
    viol = is_subsolution(np.zeros(bt.N), bt.kernel)
    if viol > tol:
        raise PreconditionError(f"constants are not discrete subsolutions (violation {viol:.3g})")
    aubry = aubry_nodes(bt) if aubry is None else list(aubry)
    return np.min(bt.h[aubry], axis=0)


def default_ladder(lambda_start=0.5, ratio=0.5, rungs=10):
    return [lambda_start * ratio**k for k in range(rungs)]


def gaps_decreasing(gaps, last=4, slack=0.1):
    """True when each of the last ``last`` gaps is at most (1 + slack) times its predecessor."""
    tail = list(gaps)[-last:]
    return all(b <= (1 + slack) * a for a, b in zip(tail, tail[1:]))


@dataclass
class SelectionResult:
    u0_formula: np.ndarray
    u0_ladder: np.ndarray
    per_lambda_gap: list  # [(lambda, sup gap), ...]
    chosen_measure_per_node: np.ndarray
    solutions: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def final_gap(self):
        return self.per_lambda_gap[-1][1]

    def monotone_violation(self):
        """Largest drop u_{lam_k}(i) - u_{lam_{k+1}}(i) over consecutive rungs."""
        worst = -np.inf
        for a, b in zip(self.solutions, self.solutions[1:]):
            worst = max(worst, float(np.max(a.u - b.u)))
        return worst


def lambda_ladder(kernel_c: CostKernel, alpha: AlphaProfile, lambdas, *, barrier: BarrierTable,
                  family: MatherFamily, aubry=None, tol_fp: float = 1e-10,
                  max_iter: int = DEFAULT_MAX_ITER, formula: FormulaResult | None = None,
                  weighting="node") -> SelectionResult:
    lambdas = [float(lam) for lam in lambdas]
    if not lambdas:
        raise ValueError("empty ladder")
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("ladder must be strictly decreasing")
    if lambdas[-1] < MIN_LAMBDA:
        raise ValueError(f"smallest lambda must be >= {MIN_LAMBDA:g}; iteration counts explode below it")
    aubry = aubry_nodes(barrier) if aubry is None else list(aubry)
    formula = u0_formula(barrier, family, alpha, weighting) if formula is None else formula
    sols = []
    gaps = []
    warm = None
    for lam in lambdas:
        sol = solve_discounted(kernel_c, alpha, lam, barrier=barrier, aubry=aubry, tol_fp=tol_fp,
                               max_iter=max_iter, warm_start=warm)
        sols.append(sol)
        warm = sol.u
        gaps.append((lam, float(np.max(np.abs(sol.u - formula.u0)))))
        logger.info("lambda=%.6g  iterations=%d  gap=%.6g", lam, sol.iterations, gaps[-1][1])
    warnings = []
    if not gaps_decreasing([g for _, g in gaps]):
        msg = "ladder gaps are not decreasing over the last rungs"
        logger.warning(msg)
        warnings.append(msg)
    return SelectionResult(formula.u0, sols[-1].u, gaps, formula.chosen, sols, warnings)


def write_selection_csv(path, result: SelectionResult, nodes):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_index", "x", "u0_formula", "u0_ladder", "chosen_measure"])
        for i, x in enumerate(nodes):
            w.writerow([i, repr(float(x)), repr(float(result.u0_formula[i])), repr(float(result.u0_ladder[i])),
                        int(result.chosen_measure_per_node[i])])


def write_ladder_csv(path, result: SelectionResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "sup_gap", "iterations", "residual"])
        for (lam, gap), sol in zip(result.per_lambda_gap, result.solutions):
            w.writerow([repr(lam), repr(gap), sol.iterations, repr(float(sol.residual))])
