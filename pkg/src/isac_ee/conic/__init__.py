"""Standard-form conic programs and an interior-point solver for them."""

from .cones import check_dual_membership, check_membership, exp_central_point
from .problem import CONE_KINDS, Cone, ConicBuilder, ConicProblem
from .solver import ConicSolution, SolverOptions, Status, solve

__all__ = [
    "CONE_KINDS", "Cone", "ConicBuilder", "ConicProblem", "ConicSolution", "SolverOptions",
    "Status", "check_dual_membership", "check_membership", "exp_central_point", "solve",
]
