"""Approximable functions: domains, Lipschitz constants and integral measures.

Every function in the registry is vectorized over numpy arrays and carries
three rules besides its evaluator: a 1-norm Lipschitz constant for a given
box, an exact integral over an axis-aligned cell, and (optionally) its
derivative.  The canonical zigzag test function is stored as a breakpoint
table rather than regenerated, since the original sampling run cannot be
replayed bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when a point or box leaves a function's admissible domain."""


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned, full-dimensional box ``[lower, upper]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("lower and upper must have the same positive length")
        if not all(math.isfinite(v) for v in lo + hi):
            raise ValueError("box bounds must be finite")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"box is not full dimensional: {lo} vs {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def interval(cls, a: float, b: float) -> "BoxDomain":
        return cls((a,), (b,))

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def b(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def widths(self) -> np.ndarray:
        return self.b - self.a

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.a - tol) and np.all(x <= self.b + tol))

    def contains_box(self, other: "BoxDomain", tol: float = 1e-12) -> bool:
        return bool(
            np.all(other.a >= self.a - tol) and np.all(other.b <= self.b + tol)
        )

    def vertices(self) -> np.ndarray:
        corners = np.array(np.meshgrid(*zip(self.lower, self.upper), indexing="ij"))
        return corners.reshape(self.n, -1).T

    def to_list(self) -> list:
        if self.n == 1:
            return [self.lower[0], self.upper[0]]
        return [list(self.lower), list(self.upper)]


def as_box(dom) -> BoxDomain:
    """Coerce ``(a, b)`` pairs or existing boxes to :class:`BoxDomain`."""
    if isinstance(dom, BoxDomain):
        return dom
    lo, hi = dom
    return BoxDomain(np.atleast_1d(lo), np.atleast_1d(hi))


@dataclass(frozen=True)
class FuncDef:
    """An approximable function together with its analytic side information.

    Attributes
    ----------
    id : str
        Registry name (``exp``, ``sin``, ..., ``zigzag`` or a user table id).
    fn : callable
        Vectorized evaluator.  For ``n == 1`` it takes an array of scalars;
        for ``n > 1`` an array of shape ``(..., n)``.
    lipschitz_rule : callable
        Maps a :class:`BoxDomain` to a valid 1-norm Lipschitz constant.
    measure_rule : callable
        Maps a sub-box to the exact integral of ``fn`` over it.
    admissible : tuple of float
        Closed interval (per coordinate) where ``fn`` is defined.
    derivative : callable, optional
    """

    id: str
    fn: Callable
    lipschitz_rule: Callable[[BoxDomain], float]
    measure_rule: Callable[[BoxDomain], float]
    admissible: tuple = (-math.inf, math.inf)
    n: int = 1
    derivative: Optional[Callable] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def check_box(self, dom: BoxDomain) -> None:
        lo, hi = self.admissible
        if dom.n != self.n:
            raise DomainError(f"{self.id} is {self.n}-dimensional, box is {dom.n}-dimensional")
        if np.any(dom.a < lo) or np.any(dom.b > hi):
            raise DomainError(f"box {dom.to_list()} leaves the domain of {self.id}")


def eval_func(func: FuncDef, x):
    """Evaluate ``func`` at ``x`` after checking the admissible domain."""
    arr = np.asarray(x, dtype=float)
    lo, hi = func.admissible
    if np.any(arr < lo) or np.any(arr > hi) or np.any(np.isnan(arr)):
        raise DomainError(f"{func.id} is undefined at {x!r}")
    out = func.fn(arr)
    return float(out) if np.ndim(out) == 0 else out


def lipschitz_bound(func: FuncDef, dom) -> float:
    dom = as_box(dom)
    func.check_box(dom)
    return float(func.lipschitz_rule(dom))


def integral_measure(func: FuncDef, cell) -> float:
    """Exact integral of ``func`` over ``cell``; zero-width cells give 0."""
    if isinstance(cell, BoxDomain):
        func.check_box(cell)
        return float(func.measure_rule(cell))
    lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in cell)
    if np.any(hi <= lo):
        return 0.0
    return integral_measure(func, BoxDomain(lo, hi))


# ---------------------------------------------------------------------------
# closed-form univariate functions


def _univariate(id, fn, lip, anti, admissible=(-math.inf, math.inf), deriv=None, **meta):
    def measure(box: BoxDomain) -> float:
        return float(anti(box.upper[0]) - anti(box.lower[0]))

    return FuncDef(id, fn,lambda box: lip(box.lower[0], box.upper[0]), measure,
                   admissible, 1, deriv, dict(meta))


def _ln_lip(a, b):
    if a <= 0:
        raise DomainError("ln needs a strictly positive lower bound for a finite Lipschitz constant")
    return 1.0 / a


def _sqrt_lip(a, b):
    if a <= 0:
        raise DomainError("sqrt needs a strictly positive lower bound for a finite Lipschitz constant")
    return 1.0 / (2.0 * math.sqrt(a))


def _xlnx(x):
    return 0.0 if x == 0 else x * math.log(x) - x


EXP = _univariate("exp", np.exp, lambda a, b: math.exp(b), math.exp, deriv=np.exp)
SIN = _univariate("sin", np.sin, lambda a, b: 1.0, lambda x: -math.cos(x), deriv=np.cos)
COS = _univariate("cos", np.cos, lambda a, b: 1.0, math.sin, deriv=lambda x: -np.sin(x))
LN = _univariate("ln", np.log, _ln_lip, _xlnx, (0.0, math.inf), deriv=lambda x: 1.0 / x)
SQRT = _univariate(
    "sqrt", np.sqrt, _sqrt_lip, lambda x: 2.0 / 3.0 * x ** 1.5, (0.0, math.inf),
    deriv=lambda x: 0.5 / np.sqrt(x),
)
CUBE = _univariate(
    "cube", lambda x: x ** 3, lambda a, b: 3.0 * max(a * a, b * b), lambda x: x ** 4 / 4.0,
    deriv=lambda x: 3.0 * x ** 2,
)


# ---------------------------------------------------------------------------
# piecewise-linear functions (zigzag and user tables)


@dataclass(frozen=True)
class ZigzagData:
    """Breakpoint table of a continuous piecewise-linear function."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise ValueError("breakpoints and values must be 1-D of equal length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", tuple(x.tolist()))
        object.__setattr__(self, "values", tuple(y.tolist()))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)


def piecewise_linear(table: ZigzagData, id: str = "user-table") -> FuncDef:
    xs = np.asarray(table.breakpoints)
    ys = np.asarray(table.values)
    slopes = table.slopes
    # prefix integrals at breakpoints
    prefix = np.concatenate([[0.0], np.cumsum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs))])

    def fn(x):
        return np.interp(x, xs, ys)

    def anti(x: float) -> float:
        k = int(np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2))
        return float(prefix[k] + 0.5 * (ys[k] + np.interp(x, xs, ys)) * (x - xs[k]))

    def lip(box: BoxDomain) -> float:
        a, b = box.lower[0], box.upper[0]
        touching = (xs[1:] > a) & (xs[:-1] < b)
        return float(np.max(np.abs(slopes[touching]))) if touching.any() else 0.0

    def measure(box: BoxDomain) -> float:
        return anti(box.upper[0]) - anti(box.lower[0])

    def deriv(x):
        k = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        return slopes[k]

    return FuncDef(id, fn, lip, measure, (float(xs[0]), float(xs[-1])), 1, deriv,
                   {"table": table})


# Full-precision breakpoints of the canonical zigzag function on [-5, 5].
ZIGZAG_TABLE = ZigzagData(
    breakpoints=(
        -5.0, -4.964333030490388, -4.523363861798294, -4.186332389004458,
        -3.563254132317301, -3.289095129965463, -2.7552444566311944,
        -2.2368021165781053, -1.4493203202395986, -0.9500258512314901,
        -0.8611768289925197, -0.7865431896495103, -0.6809775831455038,
        -0.080199727256694, 0.035676500210189144, 0.3920045223634554,
        0.601730316365771, 1.0899694535620053, 1.482993178169379,
        2.0671973152584076, 2.770942138399492, 3.2759504159580066,
        3.6241479321024053, 4.0574184357655545, 4.8362120289126835, 5.0,
    ),
    values=(
        -0.12801019571599248, -0.12446757554744907, -0.1946982637766576,
        -0.3937836755004518, -0.6434453088250474, -0.5770254473388788,
        -0.9671849317937837, -1.2943844007567447, -0.7368862021423581,
        -0.3908137365219214, -0.38988151656613956, -0.4006105011239624,
        -0.4793286685566136, -0.808540514189117, -0.8733602373302513,
        -0.8963166811449923, -0.8374228572870663, -0.832309313959877,
        -0.6014963419021636, -0.9960694536135861, -0.34221861821876076,
        0.05120309491708941, 0.09796193184439114, 0.043150841431488146,
        0.09860744585003525, 0.11308897556235686,
    ),
)

ZIGZAG = piecewise_linear(ZIGZAG_TABLE, "zigzag")


def zigzag_generate(seed: int, x_range=(-5.0, 5.0)) -> ZigzagData:
    """Sample a random zigzag with all segment slopes bounded by one.

    Each breakpoint lies uniformly in ``(prev, prev + 1]``; the last one is
    clipped to the range end.  The first value is uniform on ``[-1, 1]`` and
    each subsequent value uniform within one gap-width of its predecessor.
    """
    lo, hi = map(float, x_range)
    if not hi > lo:
        raise ValueError("x_range must be nondegenerate")
    rng = np.random.default_rng(seed)
    xs = [lo]
    while xs[-1] < hi:
        step = 1.0 - rng.random()  # (0, 1]
        xs.append(min(xs[-1] + step, hi))
    ys = [rng.uniform(-1.0, 1.0)]
    for x0, x1 in zip(xs[:-1], xs[1:]):
        gap = x1 - x0
        ys.append(rng.uniform(ys[-1] - gap, ys[-1] + gap))
    return ZigzagData(tuple(xs), tuple(ys))


# ---------------------------------------------------------------------------
# separable sums give exact n-dimensional measures cheaply


def separable_sum(parts: Sequence[FuncDef], id: Optional[str] = None) -> FuncDef:
    """``f(x) = sum_i g_i(x_i)``; the 1-norm Lipschitz constant is ``max_i L_i``."""
    parts = tuple(parts)
    n = len(parts)

    def fn(x):
        x = np.asarray(x, dtype=float)
        return sum(g.fn(x[..., i]) for i, g in enumerate(parts))

    def lip(box: BoxDomain) -> float:
        return max(g.lipschitz_rule(BoxDomain.interval(lo, hi))
                   for g, lo, hi in zip(parts, box.lower, box.upper))

    def measure(box: BoxDomain) -> float:
        w = box.widths
        total = 0.0
        for i, g in enumerate(parts):
            others = float(np.prod(np.delete(w, i)))
            total += g.measure_rule(BoxDomain.interval(box.lower[i], box.upper[i])) * others
        return total

    lo = max(g.admissible[0] for g in parts)
    hi = min(g.admissible[1] for g in parts)
    return FuncDef(id or "+".join(g.id for g in parts), fn, lip, measure, (lo, hi), n)


REGISTRY = {f.id: f for f in (EXP, SIN, COS, LN, SQRT, CUBE, ZIGZAG)}


def get_function(name: str) -> FuncDef:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown function {name!r}; known: {sorted(REGISTRY)}") from None


def load_function_table(doc) -> FuncDef:
    """Build a piecewise-linear function from the user-table JSON schema.

    ``doc`` is a mapping or JSON text with keys ``id``, ``domain``,
    ``breakpoints`` and ``values``.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        table = ZigzagData(tuple(doc["breakpoints"]), tuple(doc["values"]))
        a, b = map(float, doc["domain"])
        name = str(doc["id"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed function table: {exc}") from exc
    if a < table.breakpoints[0] or b > table.breakpoints[-1] or a >= b:
        raise ValueError("declared domain must lie inside the breakpoint range")
    func = piecewise_linear(table, name)
    return FuncDef(func.id, func.fn, func.lipschitz_rule, func.measure_rule, (a, b), 1,
                   func.derivative, func.meta)


def dump_function_table(func: FuncDef) -> dict:
    table = func.meta.get("table")
    if table is None:
        raise ValueError(f"{func.id} is not a table function")
    return {
        "id": func.id,
        "domain": list(func.admissible),
        "breakpoints": list(table.breakpoints),
        "values": list(table.values),
    }
