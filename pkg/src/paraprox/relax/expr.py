"""Expression trees for constraint functions.

JSON form of a node::

    {"op": "var", "name": "x"}          {"op": "const", "value": 2.0}
    {"op": "add", "args": [...]}        {"op": "mul", "args": [...]}
    {"op": "neg", "args": [e]}          {"op": "pow", "args": [e], "exponent": 3}
    {"op": "sin" | "cos" | "exp" | "ln" | "sqrt" | "cube", "args": [e]}
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

UNARY = ("sin", "cos", "exp", "ln", "sqrt", "cube")
KINDS = ("var", "const", "add", "mul", "neg", "pow") + UNARY

_NUMPY = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "ln": np.log, "sqrt": np.sqrt,
          "cube": lambda v: v ** 3}


class ExprError(ValueError):
    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple = ()
    name: Optional[str] = None      # var
    value: Optional[float] = None   # const, or the exponent of pow

    # -- construction helpers ------------------------------------------------
    @staticmethod
    def var(name: str) -> "Node":
        return Node("var", name=name)

    @staticmethod
    def const(value: float) -> "Node":
        return Node("const", value=float(value))

    @staticmethod
    def add(*args: "Node") -> "Node":
        return Node("add", tuple(args))

    @staticmethod
    def mul(*args: "Node") -> "Node":
        return Node("mul", tuple(args))

    @staticmethod
    def neg(arg: "Node") -> "Node":
        return Node("neg", (arg,))

    @staticmethod
    def pow(arg: "Node", exponent: float) -> "Node":
        return Node("pow", (arg,), value=float(exponent))

    @staticmethod
    def unary(op: str, arg: "Node") -> "Node":
        return Node(op, (arg,))

    # -- inspection ------------------------------------------------------------
    def walk(self, path=()):
        """Pre-order ``(path, node)`` pairs; a path lists child indices from the root."""
        yield path, self
        for i, child in enumerate(self.args):
            yield from child.walk(path + (i,))

    def depth(self) -> int:
        """Edges on the longest root-to-leaf path; a leaf has depth 0."""
        return 1 + max(c.depth() for c in self.args) if self.args else 0

    def variables(self) -> set:
        return {n.name for _, n in self.walk() if n.op == "var"}

    def at(self, path) -> "Node":
        node = self
        for i in path:
            node = node.args[i]
        return node

    def replace(self, path, new: "Node") -> "Node":
        if not path:
            return new
        i = path[0]
        args = list(self.args)
        args[i] = args[i].replace(path[1:], new)
        return Node(self.op, tuple(args), self.name, self.value)

    def sort_key(self) -> str:
        return self.to_text()

    def to_text(self) -> str:
        if self.op == "var":
            return self.name
        if self.op == "const":
            return repr(self.value)
        if self.op == "pow":
            return f"pow({self.args[0].to_text()},{self.value!r})"
        return f"{self.op}(" + ",".join(a.to_text() for a in self.args) + ")"

    # -- serialization -----------------------------------------------------------
    def to_json(self) -> dict:
        if self.op == "var":
            return {"op": "var", "name": self.name}
        if self.op == "const":
            return {"op": "const", "value": self.value}
        out = {"op": self.op, "args": [a.to_json() for a in self.args]}
        if self.op == "pow":
            out["exponent"] = self.value
        return out


def parse_node(obj, location: str = "expr") -> Node:
    """Validate and canonicalize a JSON node (commutative arguments are sorted)."""
    if not isinstance(obj, dict) or "op" not in obj:
        raise ExprError("expected an object with an 'op' field", location)
    op = obj["op"]
    if op not in KINDS:
        raise ExprError(f"unknown node kind {op!r}", location)
    if op == "var":
        name = obj.get("name")
        if not isinstance(name, str) or not name:
            raise ExprError("var node needs a 'name'", location)
        return Node.var(name)
    if op == "const":
        value = obj.get("value")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise ExprError("const node needs a finite numeric 'value'", location)
        return Node.const(value)
    args = obj.get("args")
    if not isinstance(args, list) or not args:
        raise ExprError(f"{op} node needs a non-empty 'args' list", location)
    children = tuple(parse_node(a, f"{location}.args[{i}]") for i, a in enumerate(args))
    if op in ("add", "mul"):
        if len(children) < 2:
            raise ExprError(f"{op} node needs at least two arguments", location)
        return Node(op, tuple(sorted(children, key=Node.sort_key)))
    if len(children) != 1:
        raise ExprError(f"{op} node takes exactly one argument", location)
    if op == "pow":
        k = obj.get("exponent")
        if not isinstance(k, (int, float)) or isinstance(k, bool) or not math.isfinite(k):
            raise ExprError("pow node needs a finite numeric 'exponent'", location)
        return Node.pow(children[0], k)
    return Node(op, children)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(node: Node, env: dict):
    """Vectorized evaluation; ``env`` maps variable names to arrays or floats."""
    op = node.op
    if op == "var":
        return env[node.name]
    if op == "const":
        return node.value
    vals = [evaluate(a, env) for a in node.args]
    if op == "add":
        out = vals[0]
        for v in vals[1:]:
            out = out + v
        return out
    if op == "mul":
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out
    if op == "neg":
        return -vals[0]
    if op == "pow":
        return np.power(vals[0], node.value)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        return _NUMPY[op](vals[0])


# ---------------------------------------------------------------------------
# intervals


class IntervalDomainError(ValueError):
    pass


def _outward(lo: float, hi: float):
    # a few ulps absorb differences between math.* and numpy evaluation
    if math.isfinite(lo):
        lo = lo - 4 * np.spacing(abs(lo))
    if math.isfinite(hi):
        hi = hi + 4 * np.spacing(abs(hi))
    return float(lo), float(hi)


def _contains_point(lo, hi, base, period):
    """Whether ``base + k * period`` lies in ``[lo, hi]`` for some integer ``k``."""
    k = math.ceil((lo - base) / period)
    return base + k * period <= hi


def _sin_range(lo, hi):
    if hi - lo >= 2 * math.pi:
        return -1.0, 1.0
    vals = [math.sin(lo), math.sin(hi)]
    top = 1.0 if _contains_point(lo, hi, math.pi / 2, 2 * math.pi) else max(vals)
    bottom = -1.0 if _contains_point(lo, hi, -math.pi / 2, 2 * math.pi) else min(vals)
    return bottom, top


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _cos_range(lo, hi):
    # evaluated directly; shifting by pi/2 first costs more than the outward margin
    if hi - lo >= 2 * math.pi:
        return -1.0, 1.0
    vals = [math.cos(lo), math.cos(hi)]
    top = 1.0 if _contains_point(lo, hi, 0.0, 2 * math.pi) else max(vals)
    bottom = -1.0 if _contains_point(lo, hi, math.pi, 2 * math.pi) else min(vals)
    return bottom, top


def _pow_range(lo, hi, k, location):
    if float(k).is_integer():
        k = int(k)
        if k == 0:
            return 1.0, 1.0
        if k > 0:
            if k % 2 == 1:
                return lo ** k, hi ** k
            if lo >= 0:
                return lo ** k, hi ** k
            if hi <= 0:
                return hi ** k, lo ** k
            return 0.0, max(lo ** k, hi ** k)
        if lo <= 0 <= hi:
            raise IntervalDomainError(f"{location}: negative power over an interval containing 0")
        a, b = lo ** k, hi ** k
        return min(a, b), max(a, b)
    if lo < 0 or (k < 0 and lo <= 0):
        raise IntervalDomainError(f"{location}: fractional power over [{lo}, {hi}]")
    a, b = lo ** k, hi ** k
    return min(a, b), max(a, b)


def interval(node: Node, bounds: dict, out: Optional[dict] = None, path=()) -> tuple:
    """Enclosure of ``node`` over the variable box ``bounds``.

    ``out``, when given, collects the enclosure of every sub-node by path.
    Results are widened by a few ulps per node so that floating-point
    evaluation stays inside.
    """
    op = node.op
    if op == "var":
        lo, hi = bounds[node.name]
        res = (float(lo), float(hi))
    elif op == "const":
        res = (node.value, node.value)
    else:
        kids = [interval(a, bounds, out, path + (i,)) for i, a in enumerate(node.args)]
        if op == "add":
            res = (sum(k[0] for k in kids), sum(k[1] for k in kids))
        elif op == "mul":
            lo, hi = kids[0]
            for a, b in kids[1:]:
                prods = [lo * a, lo * b, hi * a, hi * b]
                lo, hi = min(prods), max(prods)
            res = (lo, hi)
        elif op == "neg":
            res = (-kids[0][1], -kids[0][0])
        else:
            lo, hi = kids[0]
            where = "/".join(map(str, path)) or "root"
            if op == "pow":
                res = _pow_range(lo, hi, node.value, where)
            elif op == "sin":
                res = _sin_range(lo, hi)
            elif op == "cos":
                res = _cos_range(lo, hi)
            elif op == "exp":
                res = (_exp(lo), _exp(hi))
            elif op == "cube":
                res = (lo ** 3, hi ** 3)
            elif op == "ln":
                if lo <= 0:
                    raise IntervalDomainError(f"{where}: ln over [{lo}, {hi}] touches <= 0")
                res = (math.log(lo), math.log(hi))
            elif op == "sqrt":
                if lo < 0:
                    raise IntervalDomainError(f"{where}: sqrt over [{lo}, {hi}] reaches below 0")
                res = (math.sqrt(lo), math.sqrt(hi))
            else:  # pragma: no cover - KINDS is closed
                raise ExprError(f"no interval rule for {op}")
        if op in ("sin", "cos"):
            res = (max(-1.0, res[0]), min(1.0, res[1]))
    if op not in ("var", "const"):
        res = _outward(*res)
    if out is not None:
        out[path] = res
    return res


# ---------------------------------------------------------------------------
# structural forms


def affine_form(node: Node) -> Optional[tuple]:
    """``(coeffs, constant)`` if ``node`` is affine in its variables, else None."""
    op = node.op
    if op == "var":
        return {node.name: 1.0}, 0.0
    if op == "const":
        return {}, node.value
    if op == "neg":
        inner = affine_form(node.args[0])
        if inner is None:
            return None
        return {v: -c for v, c in inner[0].items()}, -inner[1]
    if op == "add":
        coeffs, const = {}, 0.0
        for a in node.args:
            part = affine_form(a)
            if part is None:
                return None
            for v, c in part[0].items():
                coeffs[v] = coeffs.get(v, 0.0) + c
            const += part[1]
        return coeffs, const
    if op == "mul":
        scale, rest = 1.0, None
        for a in node.args:
            part = affine_form(a)
            if part is None:
                return None
            if not part[0]:
                scale *= part[1]
            elif rest is None:
                rest = part
            else:
                return None
        if rest is None:
            return {}, scale
        return {v: scale * c for v, c in rest[0].items()}, scale * rest[1]
    if op == "pow" and node.value == 1.0:
        return affine_form(node.args[0])
    return None


def quadratic_form(node: Node) -> Optional[tuple]:
    """``(squares, linear, constant)`` for separable quadratics, else None."""
    aff = affine_form(node)
    if aff is not None:
        return {}, aff[0], aff[1]
    op = node.op
    if op == "neg":
        inner = quadratic_form(node.args[0])
        if inner is None:
            return None
        sq, lin, c = inner
        return {v: -a for v, a in sq.items()}, {v: -a for v, a in lin.items()}, -c
    if op == "add":
        sq, lin, c = {}, {}, 0.0
        for a in node.args:
            part = quadratic_form(a)
            if part is None:
                return None
            for v, k in part[0].items():
                sq[v] = sq.get(v, 0.0) + k
            for v, k in part[1].items():
                lin[v] = lin.get(v, 0.0) + k
            c += part[2]
        return sq, lin, c
    if op == "mul":
        scale, rest = 1.0, None
        for a in node.args:
            part = quadratic_form(a)
            if part is None:
                return None
            if not part[0] and not part[1]:
                scale *= part[2]
            elif rest is None:
                rest = part
            else:
                return None
        sq, lin, c = rest
        return ({v: scale * k for v, k in sq.items()}, {v: scale * k for v, k in lin.items()},
                scale * c)
    if op == "pow" and node.value == 2.0:
        aff = affine_form(node.args[0])
        if aff is None or len(aff[0]) > 1:
            return None
        if not aff[0]:
            return {}, {}, aff[1] ** 2
        (v, a), = aff[0].items()
        d = aff[1]
        return {v: a * a}, {v: 2 * a * d}, d * d
    return None
