"""Mixed-integer nonlinear instances in a small JSON format.

::

    {
      "name": "demo",
      "variables": [{"name": "x", "lb": 0, "ub": 3.14159, "integer": false}, ...],
      "objective": {"linear": {"x": 1.0}, "constant": 0.0},
      "constraints": [{"name": "c0", "body": <node>, "sense": "<=", "rhs": 0.0}, ...]
    }

The objective is always minimized and must be linear.  Every variable
needs finite bounds.  Nodes are described in :mod:`paraprox.relax.expr`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .expr import ExprError, Node, parse_node

SENSES = ("<=", ">=", "=")


class SchemaError(ValueError):
    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass(frozen=True)
class Var:
    name: str
    lb: float
    ub: float
    integer: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    body: Node
    sense: str
    rhs: float


@dataclass
class MinlpInstance:
    name: str
    variables: tuple
    objective: dict                       # variable -> coefficient
    constraints: tuple
    objective_constant: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.constraints = tuple(self.constraints)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate variable names", "variables")
        known = set(names)
        for v in self.variables:
            if not (math.isfinite(v.lb) and math.isfinite(v.ub)):
                raise SchemaError(f"variable {v.name!r} needs finite bounds", "variables")
            if v.lb > v.ub:
                raise SchemaError(f"variable {v.name!r} has empty bounds", "variables")
        for k in self.objective:
            if k not in known:
                raise SchemaError(f"objective uses undeclared variable {k!r}", "objective")
        for i, c in enumerate(self.constraints):
            missing = c.body.variables() - known
            if missing:
                raise SchemaError(f"undeclared variables {sorted(missing)}", f"constraints[{i}]")
            if c.sense not in SENSES:
                raise SchemaError(f"bad sense {c.sense!r}", f"constraints[{i}]")

    @property
    def bounds(self) -> dict:
        return {v.name: (v.lb, v.ub) for v in self.variables}

    def var(self, name: str) -> Var:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "variables": [{"name": v.name, "lb": v.lb, "ub": v.ub, "integer": v.integer}
                          for v in self.variables],
            "objective": {"linear": dict(self.objective), "constant": self.objective_constant},
            "constraints": [{"name": c.name, "body": c.body.to_json(), "sense": c.sense,
                             "rhs": c.rhs} for c in self.constraints],
            **({"meta": self.meta} if self.meta else {}),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def _number(value, location: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {value!r}", location)
    return float(value)


def parse_instance(text_or_doc) -> MinlpInstance:
    """Validate a JSON document (string or parsed) into an instance."""
    if isinstance(text_or_doc, (str, bytes)):
        try:
            doc = json.loads(text_or_doc)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    else:
        doc = text_or_doc
    if not isinstance(doc, dict):
        raise SchemaError("instance must be a JSON object")
    variables = []
    raw_vars = doc.get("variables")
    if not isinstance(raw_vars, list):
        raise SchemaError("missing 'variables' list", "variables")
    for i, v in enumerate(raw_vars):
        loc = f"variables[{i}]"
        if not isinstance(v, dict) or not isinstance(v.get("name"), str):
            raise SchemaError("variable needs a 'name'", loc)
        if "lb" not in v or "ub" not in v:
            raise SchemaError(f"variable {v['name']!r} is unbounded", loc)
        lb, ub = _number(v["lb"], loc + ".lb"), _number(v["ub"], loc + ".ub")
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise SchemaError(f"variable {v['name']!r} is unbounded", loc)
        variables.append(Var(v["name"], lb, ub, bool(v.get("integer", False))))
    obj = doc.get("objective", {})
    if not isinstance(obj, dict):
        raise SchemaError("objective must be an object", "objective")
    if "body" in obj:
        raise SchemaError("objective must be linear; use 'linear' coefficients", "objective")
    linear = obj.get("linear", {})
    if not isinstance(linear, dict):
        raise SchemaError("objective.linear must map variables to numbers", "objective")
    objective = {k: _number(c, f"objective.linear.{k}") for k, c in linear.items()}
    constant = _number(obj.get("constant", 0.0), "objective.constant")
    constraints = []
    raw_cons = doc.get("constraints", [])
    if not isinstance(raw_cons, list):
        raise SchemaError("'constraints' must be a list", "constraints")
    for i, c in enumerate(raw_cons):
        loc = f"constraints[{i}]"
        if not isinstance(c, dict):
            raise SchemaError("constraint must be an object", loc)
        sense = c.get("sense")
        if sense not in SENSES:
            raise SchemaError(f"bad sense token {sense!r}", loc)
        try:
            body = parse_node(c.get("body"), loc + ".body")
        except ExprError as exc:
            raise SchemaError(str(exc)) from None
        constraints.append(Constraint(c.get("name", f"c{i}"), body, sense,
                                      _number(c.get("rhs", 0.0), loc + ".rhs")))
    return MinlpInstance(doc.get("name", "instance"), variables, objective, constraints, constant,
                         dict(doc.get("meta", {})))


def load_instance(path: str) -> MinlpInstance:
    with open(path) as fh:
        return parse_instance(fh.read())
