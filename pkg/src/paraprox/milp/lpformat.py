"""CPLEX LP-format writer and a parser for the subset it emits.

The writer produces ``Minimize`` / ``Subject To`` / ``Bounds`` /
``Binaries`` / ``End`` sections with variables in declaration order.
Square terms (used by relaxation emission) go into bracketed quadratic
parts, e.g. ``c1: 2 x + [ 3 x ^ 2 ] <= 4``.
"""

from __future__ import annotations

import math
import re

from .model import BINARY, CONTINUOUS, INTEGER, MilpModel, MilpSolution, ModelError

_NAME = re.compile(r"^[A-Za-z_!\"#$%&()/,.;?@`'{}|~][A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]*$")
_LINE_WIDTH = 78


def _num(x: float) -> str:
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    return repr(float(x))


def _check_name(name: str) -> str:
    if not _NAME.match(name) or name[0] in "eE" and re.match(r"^[eE][0-9+-]", name):
        raise ModelError(f"{name!r} is not a valid LP-format identifier")
    return name


def _terms(linear, squares=(), constant=0.0, filler="") -> list[str]:
    parts = []
    for v, c in linear:
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_num(abs(c))} {v}")
    if squares:
        quad = []
        for v, c in squares:
            sign = "-" if c < 0 else "+"
            quad.append(f"{sign} {_num(abs(c))} {v} ^ 2")
        if quad[0].startswith("+ "):
            quad[0] = quad[0][2:]
        parts.append("+ [ " + " ".join(quad) + " ]")
    if constant:
        parts.append(f"{'-' if constant < 0 else '+'} {_num(abs(constant))}")
    if not parts:
        # LP rows need at least one term; a zero coefficient keeps the row
        parts = [f"+ 0 {filler}"]
    if parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    return parts


def _wrap(head: str, parts: list[str], tail: str = "") -> list[str]:
    lines = []
    cur = head
    for p in parts + ([tail] if tail else []):
        if len(cur) + 1 + len(p) > _LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def export_lp(model: MilpModel) -> str:
    for var in model.variables:
        _check_name(var.name)
    out = [f"\\ Problem: {model.name}", "Minimize"]
    filler = model.variables[0].name if model.variables else ""
    obj = list(model.objective.items())
    if obj or model.objective_constant:
        out.extend(_wrap(" obj:", _terms(obj, (), model.objective_constant, filler)))
    else:
        out.append(" obj:")
    out.append("Subject To")
    for con in model.constraints:
        _check_name(con.name)
        out.extend(_wrap(f" {con.name}:", _terms(con.coeffs, con.squares, 0.0, filler),
                         f"{con.sense} {_num(con.rhs)}"))
    out.append("Bounds")
    for var in model.variables:
        if var.is_binary:
            continue
        if var.lb == -math.inf and var.ub == math.inf:
            out.append(f" {var.name} free")
        elif var.ub == math.inf:
            out.append(f" {var.name} >= {_num(var.lb)}")
        elif var.lb == var.ub:
            out.append(f" {var.name} = {_num(var.lb)}")
        else:
            out.append(f" {_num(var.lb)} <= {var.name} <= {_num(var.ub)}")
    binaries = [v.name for v in model.variables if v.is_binary]
    if binaries:
        out.append("Binaries")
        out.extend(_wrap("", binaries))
    generals = [v.name for v in model.variables if v.kind == INTEGER]
    if generals:
        out.append("Generals")
        out.extend(_wrap("", generals))
    out.append("End")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# parsing

_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "minimum": "obj", "min": "obj",
    "subject to": "con", "such that": "con", "st": "con", "s.t.": "con",
    "bounds": "bnd", "bound": "bnd", "binaries": "bin", "binary": "bin",
    "bin": "bin", "generals": "gen", "general": "gen", "end": "end",
}
_TOKEN = re.compile(r"\[|\]|\^|<=|>=|=<|=>|=|<|>|[+-]|[^\s\[\]\^<>=+:-]+:?|:")


def _parse_number(tok: str) -> float:
    low = tok.lower()
    if low in ("inf", "infinity"):
        return math.inf
    return float(tok)


def _is_number(tok: str) -> bool:
    try:
        _parse_number(tok)
        return True
    except ValueError:
        return False


def _parse_expr(tokens: list[str]):
    """Parse ``[+-] coef var ... [ ... ^ 2 ]`` into linear and square maps."""
    linear: dict[str, float] = {}
    squares: dict[str, float] = {}
    constant = 0.0
    sign = 1.0
    coef = None
    in_quad = False
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "[":
            in_quad = True
        elif tok == "]":
            in_quad = False
        elif tok in "+-":
            sign = sign * (-1.0 if tok == "-" else 1.0)
        elif coef is None and _is_number(tok):
            coef = _parse_number(tok)
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if nxt is None or nxt in "+-]" or nxt == "[":
                constant += sign * coef
                sign, coef = 1.0, None
        else:
            value = sign * (1.0 if coef is None else coef)
            if in_quad and i + 2 < len(tokens) and tokens[i + 1] == "^":
                if tokens[i + 2] != "2":
                    raise ModelError(f"unsupported power {tokens[i + 2]}")
                squares[tok] = squares.get(tok, 0.0) + value
                i += 2
            elif in_quad:
                raise ModelError("only square terms are supported in quadratic parts")
            else:
                linear[tok] = linear.get(tok, 0.0) + value
            sign, coef = 1.0, None
        i += 1
    return linear, squares, constant


def parse_lp(text: str) -> MilpModel:
    """Parse LP-format text (the subset written by :func:`export_lp`)."""
    # strip comments and gather logical statements per section
    sections: dict[str, list[str]] = {"obj": [], "con": [], "bnd": [], "bin": [], "gen": []}
    current = None
    name = "model"
    for raw in text.splitlines():
        if raw.startswith("\\ Problem:"):
            name = raw.split(":", 1)[1].strip()
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = _SECTIONS.get(line.lower())
        if key is not None:
            current = key
            if key == "end":
                break
            continue
        if current is None:
            raise ModelError(f"text before the first section: {line!r}")
        sections[current].append(line)

    def statements(lines):
        # a new statement begins with "name:" or, for constraints, after a sense + rhs
        joined = " ".join(lines)
        toks = _TOKEN.findall(joined)
        stmts, cur = [], []
        for t in toks:
            if t.endswith(":") and len(t) > 1 and cur and any(s in cur for s in ("<=", ">=", "=", "<", ">", "=<", "=>")):
                stmts.append(cur)
                cur = []
            cur.append(t)
        if cur:
            stmts.append(cur)
        return stmts

    model = MilpModel(name)
    binary_list = " ".join(sections["bin"]).split()
    general_list = " ".join(sections["gen"]).split()
    binaries, generals = set(binary_list), set(general_list)
    # declare variables lazily in order of first appearance
    seen: list[str] = []
    bounds: dict[str, list[float]] = {}

    def touch(v):
        if v not in bounds:
            bounds[v] = [0.0, math.inf]
            seen.append(v)

    obj_toks = _TOKEN.findall(" ".join(sections["obj"]))
    if obj_toks and obj_toks[0].endswith(":"):
        obj_toks = obj_toks[1:]
    obj_lin, obj_sq, obj_const = _parse_expr(obj_toks)
    if obj_sq:
        raise ModelError("quadratic objectives are not supported")

    for v in obj_lin:
        touch(v)
    cons = []
    for k, st in enumerate(statements(sections["con"])):
        cname = f"c{k}"
        if st and st[0].endswith(":"):
            cname = st[0][:-1]
            st = st[1:]
        sense_pos = next((i for i, t in enumerate(st) if t in ("<=", ">=", "=", "<", ">", "=<", "=>")), None)
        if sense_pos is None:
            raise ModelError(f"constraint {cname} has no sense")
        lin, sq, const = _parse_expr(st[:sense_pos])
        sense = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(st[sense_pos], st[sense_pos])
        rhs_toks = st[sense_pos + 1:]
        rsign = 1.0
        while rhs_toks and rhs_toks[0] in "+-":
            rsign *= -1.0 if rhs_toks[0] == "-" else 1.0
            rhs_toks = rhs_toks[1:]
        if len(rhs_toks) != 1:
            raise ModelError(f"constraint {cname}: bad right-hand side {' '.join(rhs_toks)!r}")
        rhs = rsign * _parse_number(rhs_toks[0]) - const
        for v in list(lin) + list(sq):
            touch(v)
        cons.append((cname, lin, sq, sense, rhs))

    for line in sections["bnd"]:
        toks = _TOKEN.findall(line)
        toks = _merge_signs(toks)
        if len(toks) == 2 and toks[1].lower() == "free":
            touch(toks[0])
            bounds[toks[0]] = [-math.inf, math.inf]
        elif len(toks) == 5:
            lo, _, v, _, hi = toks
            touch(v)
            bounds[v] = [_parse_number(lo), _parse_number(hi)]
        elif len(toks) == 3:
            left, op, right = toks
            if _is_number(left):
                left, right = right, left
                op = {"<=": ">=", ">=": "<=", "=<": ">=", "=>": "<=", "<": ">=", ">": "<="}.get(op, op)
            touch(left)
            val = _parse_number(right)
            if op in ("<=", "=<", "<"):
                bounds[left][1] = val
            elif op in (">=", "=>", ">"):
                bounds[left][0] = val
            else:
                bounds[left] = [val, val]
        else:
            raise ModelError(f"cannot parse bound line {line!r}")
    for v in binary_list + general_list:
        touch(v)
    for v in seen:
        if v in binaries:
            model.add_var(v, BINARY, 0.0, 1.0)
        elif v in generals:
            lo, hi = bounds[v]
            model.add_var(v, INTEGER, lo, hi)
        else:
            lo, hi = bounds[v]
            model.add_var(v, CONTINUOUS, lo, hi)
    for cname, lin, sq, sense, rhs in cons:
        model.add_constr(lin, sense, rhs, cname, sq or None)
    model.set_objective(obj_lin, obj_const)
    return model


def _merge_signs(toks: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(toks):
        if toks[i] in "+-" and i + 1 < len(toks) and _is_number(toks[i + 1]):
            out.append(toks[i] + toks[i + 1] if toks[i] == "-" else toks[i + 1])
            i += 2
        else:
            out.append(toks[i])
            i += 1
    return out


def read_solution_file(text: str, model: MilpModel | None = None) -> MilpSolution:
    """Parse a plain external-solver result.

    Lines are ``status <word>``, ``objective <value>`` and ``<name> <value>``;
    ``#`` starts a comment.  When ``model`` is given, every model variable
    must be present.
    """
    status = None
    objective = math.nan
    values = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"expected two fields, got {line!r}")
        key, val = parts
        if key.lower() == "status":
            status = val.lower()
        elif key.lower() == "objective":
            objective = float(val)
        else:
            values[key] = float(val)
    if status is None:
        raise ValueError("solution file lacks a status line")
    if model is not None:
        missing = [v.name for v in model.variables if v.name not in values]
        if missing and status == "optimal":
            raise ValueError(f"solution misses variables {missing[:3]}")
    return MilpSolution(status, values, objective, {"source": "external"})
