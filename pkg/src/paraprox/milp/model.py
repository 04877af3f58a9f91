"""Solver-agnostic linear model with binaries, plus point-feasibility checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"
SENSES = ("<=", ">=", "=")


class ModelError(ValueError):
    """Malformed model: undeclared variables, bad bounds, unsupported terms."""


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY

    @property
    def is_integral(self) -> bool:
        return self.kind in (BINARY, INTEGER)


@dataclass(frozen=True)
class Constraint:
    """``sum(coeffs[v] * v) + sum(squares[v] * v**2)  sense  rhs``.

    ``squares`` is only used by relaxation emission; the built-in solver
    rejects models that carry square terms.
    """

    coeffs: tuple
    sense: str
    rhs: float
    name: str = ""
    squares: tuple = ()

    def activity(self, point: Mapping[str, float]) -> float:
        total = sum(c * point[v] for v, c in self.coeffs)
        total += sum(c * point[v] ** 2 for v, c in self.squares)
        return total

    def slack(self, point: Mapping[str, float]) -> float:
        act = self.activity(point)
        if self.sense == "<=":
            return self.rhs - act
        if self.sense == ">=":
            return act - self.rhs
        return -abs(act - self.rhs)


class MilpModel:
    """Minimization model over continuous, binary and general integer variables.

    Variables and constraints keep declaration order, which fixes the column
    order used by the solvers and the LP writer.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[str, float] = {}
        self.objective_constant = 0.0
        self._index: dict[str, int] = {}
        self._arrays = None

    # -- building ---------------------------------------------------------
    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0,
                ub: float = math.inf) -> str:
        if name in self._index:
            raise ModelError(f"duplicate variable {name!r}")
        if kind not in (CONTINUOUS, BINARY, INTEGER):
            raise ModelError(f"unknown variable kind {kind!r}")
        lb, ub = float(lb), float(ub)
        if kind == BINARY and (lb < 0 or ub > 1):
            raise ModelError(f"binary {name!r} needs bounds inside [0, 1]")
        if lb > ub:
            raise ModelError(f"empty bounds for {name!r}: [{lb}, {ub}]")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, kind, lb, ub))
        self._arrays = None
        return name

    def add_constr(self, coeffs: Mapping[str, float], sense: str, rhs: float,
                   name: str = "", squares: Optional[Mapping[str, float]] = None) -> Constraint:
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        for v in list(coeffs) + list(squares or {}):
            if v not in self._index:
                raise ModelError(f"constraint {name or len(self.constraints)} uses undeclared {v!r}")
        con = Constraint(
            tuple((v, float(c)) for v, c in coeffs.items() if c != 0.0),
            sense, float(rhs), name or f"c{len(self.constraints)}",
            tuple((v, float(c)) for v, c in (squares or {}).items() if c != 0.0),
        )
        self.constraints.append(con)
        self._arrays = None
        return con

    def set_objective(self, coeffs: Mapping[str, float], constant: float = 0.0) -> None:
        for v in coeffs:
            if v not in self._index:
                raise ModelError(f"objective uses undeclared {v!r}")
        self.objective = {v: float(c) for v, c in coeffs.items() if c != 0.0}
        self.objective_constant = float(constant)
        self._arrays = None

    # -- queries ----------------------------------------------------------
    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def num_binaries(self) -> int:
        return sum(v.is_binary for v in self.variables)

    @property
    def num_integers(self) -> int:
        return sum(v.kind == INTEGER for v in self.variables)

    @property
    def num_continuous(self) -> int:
        return sum(not v.is_integral for v in self.variables)

    @property
    def has_squares(self) -> bool:
        return any(c.squares for c in self.constraints)

    def arrays(self):
        """Column data ``(c, A, row_lo, row_hi, lb, ub, is_integral)``; ``A`` is CSR."""
        if self._arrays is not None:
            return self._arrays
        if self.has_squares:
            raise ModelError("model carries square terms; not a linear model")
        nv = len(self.variables)
        c = np.zeros(nv)
        for v, coef in self.objective.items():
            c[self._index[v]] = coef
        rows, cols, vals = [], [], []
        lo = np.empty(len(self.constraints))
        hi = np.empty(len(self.constraints))
        for i, con in enumerate(self.constraints):
            for v, coef in con.coeffs:
                rows.append(i)
                cols.append(self._index[v])
                vals.append(coef)
            lo[i] = con.rhs if con.sense in (">=", "=") else -np.inf
            hi[i] = con.rhs if con.sense in ("<=", "=") else np.inf
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), nv))
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        binary = np.array([v.is_integral for v in self.variables], dtype=bool)
        self._arrays = (c, A, lo, hi, lb, ub, binary)
        return self._arrays

    def objective_value(self, point: Mapping[str, float]) -> float:
        return self.objective_constant + sum(c * point[v] for v, c in self.objective.items())

    def __repr__(self) -> str:
        return (f"MilpModel({self.name!r}, {len(self.variables)} vars "
                f"[{self.num_binaries} binary], {len(self.constraints)} constraints)")


@dataclass
class MilpSolution:
    status: str
    assignment: dict = field(default_factory=dict)
    objective: float = math.nan
    stats: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, name: str) -> float:
        return self.assignment[name]


@dataclass
class FeasibilityReport:
    feasible: bool
    slacks: dict
    violations: list
    objective: float

    def __bool__(self) -> bool:
        return self.feasible


def check_point_feasible(model: MilpModel, point: Mapping[str, float],
                         tol: float = 1e-6) -> FeasibilityReport:
    """Signed slack of every constraint at ``point``.

    Negative slacks are violations.  Variable bounds and integrality
    are reported as pseudo-constraints named ``bound:<var>`` and
    ``integrality:<var>``.
    """
    missing = [v.name for v in model.variables if v.name not in point]
    if missing:
        raise KeyError(f"assignment misses {len(missing)} variable(s), e.g. {missing[:3]}")
    slacks = {}
    violations = []
    for con in model.constraints:
        s = con.slack(point)
        slacks[con.name] = s
        if s < -tol:
            violations.append((con.name, s))
    for var in model.variables:
        x = float(point[var.name])
        s = min(x - var.lb, var.ub - x)
        if s < -tol:
            violations.append((f"bound:{var.name}", s))
        if var.is_integral:
            frac = abs(x - round(x))
            if frac > tol:
                violations.append((f"integrality:{var.name}", -frac))
    return FeasibilityReport(not violations, slacks, violations, model.objective_value(point))
