"""Linear models with binaries: building, solving, LP-format exchange."""

from .lpformat import export_lp, parse_lp, read_solution_file
from .model import (BINARY, CONTINUOUS, INTEGER, Constraint, FeasibilityReport, MilpModel,
                    MilpSolution, ModelError, Variable, check_point_feasible)
from .simplex import Basis, LPResult, solve_lp
from .solver import Limits, SizeLimitExceeded, exceeds_size, solve_milp

__all__ = [
    "BINARY", "CONTINUOUS", "INTEGER", "Basis", "Constraint", "FeasibilityReport", "LPResult",
    "Limits", "MilpModel", "MilpSolution", "ModelError", "SizeLimitExceeded",
    "Variable", "check_point_feasible", "exceeds_size", "export_lp", "parse_lp",
    "read_solution_file", "solve_lp", "solve_milp",
]
