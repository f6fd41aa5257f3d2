"""Discrete weak KAM laboratory for degenerate discounted Hamilton-Jacobi equations on the circle."""

from .barrier import BarrierTable, aubry_nodes, peierls, weak_kam_row
from .criticality import critical_value, extreme_measures, min_mean_cycle, tight_graph
from .discounted import DiscountedSolution, backward_trajectory, solve_discounted
from .errors import ConvergenceError, DiagnosticError, PreconditionError, WeakKamError
from .lattice import CostKernel, Grid, build_kernel
from .model import AlphaProfile, ModelSpec, oracle
from .selection import baby_case_formula, constraint_check, lambda_ladder, u0_formula

__version__ = "0.1.0"
