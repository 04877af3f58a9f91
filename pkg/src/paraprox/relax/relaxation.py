"""Paraboloid relaxations of univariate nonlinear terms.

A term ``f(w)`` with ``w = c x + d`` affine in a single variable is bracketed
by stored approximations: ``max_l p^l(w) <= f(w) <= min_m q^m(w)``.  Because
``w`` is affine, each ``p(w)`` expands to a univariate quadratic in ``x``.

``para`` replaces the term by a fresh variable ``z`` with ``p^l(w) <= z``
and ``z <= q^m(w)``.  ``both`` keeps the term, ties ``z = f(w)`` and adds the
same inequalities as cuts.  ``orig`` passes the instance through.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

from ..lookup import LookupTable, TableEntry, sine_periodic_extend
from ..milp import BINARY, CONTINUOUS, INTEGER, MilpModel
from ..paraboloid import Paraboloid, ParaboloidSet
from .expr import UNARY, Node, affine_form, interval, quadratic_form
from .instance import Constraint, MinlpInstance, Var

VARIANTS = ("orig", "para", "both")


def propagate_bounds(inst: MinlpInstance) -> dict:
    """Enclosure of every node, keyed by ``(constraint index, path)``."""
    bounds = inst.bounds
    out = {}
    for ci, con in enumerate(inst.constraints):
        local = {}
        interval(con.body, bounds, local)
        for path, rng in local.items():
            out[(ci, path)] = rng
    return out


@dataclass
class Substitution:
    constraint: int
    path: tuple
    func: str
    var: str
    scale: float            # w = scale * var + offset
    offset: float
    arg_range: tuple
    node_range: tuple
    below: TableEntry
    above: TableEntry
    below_set: ParaboloidSet
    above_set: ParaboloidSet


@dataclass
class SubstitutionPlan:
    epsilon: float
    items: list = field(default_factory=list)
    skipped: list = field(default_factory=list)   # (constraint, path, func, reason)

    def __bool__(self) -> bool:
        return bool(self.items)


def find_substitutable(inst: MinlpInstance, table: LookupTable, epsilon: float,
                       periodic: bool = False) -> SubstitutionPlan:
    """Univariate terms with an affine single-variable argument covered by the table."""
    plan = SubstitutionPlan(epsilon)
    ranges = propagate_bounds(inst)
    for ci, con in enumerate(inst.constraints):
        for path, node in con.body.walk():
            if node.op not in UNARY:
                continue
            aff = affine_form(node.args[0])
            if aff is None:
                plan.skipped.append((ci, path, node.op, "argument is not affine"))
                continue
            coeffs = {v: c for v, c in aff[0].items() if c != 0.0}
            if len(coeffs) != 1:
                reason = "argument is constant" if not coeffs else "argument has several variables"
                plan.skipped.append((ci, path, node.op, reason))
                continue
            (var, scale), = coeffs.items()
            lo, hi = ranges[(ci, path + (0,))]
            if not hi > lo:
                plan.skipped.append((ci, path, node.op, "zero-width argument range"))
                continue
            dom = (lo, hi)
            below = table.get(node.op, dom, epsilon, "below")
            above = table.get(node.op, dom, epsilon, "above")
            below_set = below.paraboloids if below else None
            if below is None and periodic and node.op == "sin":
                base = table.get("sin", (-3.141592653589793 / 2, 3 * 3.141592653589793 / 2),
                                 epsilon, "below")
                if base is not None and base.nonpos_quad:
                    below, below_set = base, sine_periodic_extend(base, dom)
            if below is None or above is None:
                missing = " and ".join(s for s, e in (("below", below), ("above", above)) if e is None)
                plan.skipped.append((ci, path, node.op, f"no {missing} table entry covers "
                                     f"[{lo:.6g}, {hi:.6g}]"))
                continue
            plan.items.append(Substitution(ci, path, node.op, var, scale, aff[1], dom,
                                           ranges[(ci, path)], below, above, below_set,
                                           above.paraboloids))
    return plan


def _quad_node(p: Paraboloid, var: str, scale: float, offset: float, sign: float) -> Node:
    """``sign * p(scale * var + offset)`` as an explicit quadratic in ``var``."""
    a, b, g = p.alpha[0], p.beta[0], p.gamma
    sq = sign * a * scale * scale
    lin = sign * (2 * a * scale * offset + b * scale)
    const = sign * (a * offset * offset + b * offset + g)
    x = Node.var(var)
    return Node.add(Node.mul(Node.const(sq), Node.pow(x, 2)), Node.mul(Node.const(lin), x),
                    Node.const(const))


@dataclass
class AuxSpec:
    name: str
    sub: Substitution


@dataclass
class RelaxedInstance:
    variant: str
    instance: MinlpInstance
    aux: list = field(default_factory=list)
    log: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def dumps(self) -> str:
        return self.instance.dumps()


def build_relaxation(inst: MinlpInstance, plan: Optional[SubstitutionPlan],
                     variant: str = "para") -> RelaxedInstance:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if variant == "orig":
        return RelaxedInstance("orig", inst)
    if not plan:
        msg = f"no substitutable terms; {variant} equals orig"
        warnings.warn(msg)
        return RelaxedInstance("orig", inst, warnings=[msg])

    variables = list(inst.variables)
    bodies = [c.body for c in inst.constraints]
    extra = []
    aux = []
    log = []
    taken = {v.name for v in variables}
    # replacing one node by another keeps every other path valid
    for k, sub in enumerate(plan.items):
        name = f"aux{k}"
        while name in taken:
            name += "_"
        taken.add(name)
        lo, hi = sub.node_range
        variables.append(Var(name, lo, hi))
        z = Node.var(name)
        if variant == "para":
            bodies[sub.constraint] = bodies[sub.constraint].replace(sub.path, z)
        else:
            original = inst.constraints[sub.constraint].body.at(sub.path)
            extra.append(Constraint(f"{name}_link", Node.add(z, Node.neg(original)), "=", 0.0))
        for l, p in enumerate(sub.below_set):
            body = Node.add(_quad_node(p, sub.var, sub.scale, sub.offset, 1.0), Node.neg(z))
            extra.append(Constraint(f"{name}_below{l}", body, "<=", 0.0))
        for m, q in enumerate(sub.above_set):
            body = Node.add(z, _quad_node(q, sub.var, sub.scale, sub.offset, -1.0))
            extra.append(Constraint(f"{name}_above{m}", body, "<=", 0.0))
        aux.append(AuxSpec(name, sub))
        log.append({"aux": name, "constraint": sub.constraint, "path": list(sub.path),
                    "func": sub.func, "var": sub.var, "scale": sub.scale, "offset": sub.offset,
                    "arg_range": list(sub.arg_range), "eps": plan.epsilon,
                    "below_domain": sub.below.domain.to_list(), "below_count": len(sub.below_set),
                    "above_domain": sub.above.domain.to_list(), "above_count": len(sub.above_set)})
    constraints = [Constraint(c.name, b, c.sense, c.rhs) for c, b in zip(inst.constraints, bodies)]
    relaxed = MinlpInstance(f"{inst.name}_{variant}", variables, dict(inst.objective),
                            constraints + extra, inst.objective_constant,
                            dict(inst.meta, variant=variant))
    return RelaxedInstance(variant, relaxed, aux, log)


def to_milp_model(inst: MinlpInstance) -> MilpModel:
    """Quadratic-separable instances as a model for the LP-format writer."""
    m = MilpModel(inst.name)
    for v in inst.variables:
        if v.integer:
            kind = BINARY if (v.lb, v.ub) == (0.0, 1.0) else INTEGER
        else:
            kind = CONTINUOUS
        m.add_var(v.name, kind, v.lb, v.ub)
    for c in inst.constraints:
        form = quadratic_form(c.body)
        if form is None:
            raise ValueError(f"constraint {c.name} is not a separable quadratic")
        sq, lin, const = form
        m.add_constr(lin, c.sense, c.rhs - const, c.name, sq)
    m.set_objective(inst.objective, inst.objective_constant)
    return m
