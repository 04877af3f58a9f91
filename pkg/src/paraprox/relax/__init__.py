"""Nonlinear instances, their paraboloid relaxations and evaluation tools."""

from .expr import ExprError, IntervalDomainError, Node, affine_form, evaluate, interval, parse_node
from .instance import Constraint, MinlpInstance, SchemaError, Var, load_instance, parse_instance
from .metrics import (GapReport, census_csv, function_census, gap_csv, gap_metrics, read_gap_csv,
                      read_result_file, sgm, sgm_by_variant)
from .oracle import OracleResult, ScaleError, brute_force_minlp
from .relaxation import (RelaxedInstance, Substitution, SubstitutionPlan, build_relaxation,
                         find_substitutable, propagate_bounds, to_milp_model)

__all__ = [
    "Constraint", "ExprError", "GapReport", "IntervalDomainError", "MinlpInstance", "Node",
    "OracleResult", "RelaxedInstance", "ScaleError", "SchemaError", "Substitution",
    "SubstitutionPlan", "Var", "affine_form", "brute_force_minlp", "build_relaxation",
    "census_csv", "evaluate", "find_substitutable", "function_census", "gap_csv", "gap_metrics",
    "interval", "load_instance", "parse_instance", "parse_node", "propagate_bounds",
    "read_gap_csv", "read_result_file", "sgm", "sgm_by_variant", "to_milp_model",
]
