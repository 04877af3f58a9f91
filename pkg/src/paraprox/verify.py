"""Certified checks that a paraboloid set approximates a function from below.

Two properties are checked on a box ``D`` for a set ``{p^l}``:

* one-sidedness: ``p^l(x) <= f(x)`` for every member and every ``x``;
* coverage: ``max_l p^l(x) >= f(x) - eps`` for every ``x``.

Both reduce to bounding the global maximum of a Lipschitz function, which
:func:`certify_max` does with the Piyavskii-Shubert sawtooth bound in one
dimension and with a uniform grid in higher dimensions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .funcspace import BoxDomain, FuncDef, as_box, lipschitz_bound
from .paraboloid import Paraboloid, ParaboloidSet

DEFAULT_TOL = 1e-6
MAX_EVALS = 5_000_000
MAX_GRID_POINTS = 20_000_000


@dataclass
class CheckResult:
    """Outcome of a certified maximization.

    ``value`` is a proven upper bound on ``max g``; ``incumbent`` is the
    best value actually observed at ``point``.  ``certified`` is false when
    the evaluation budget ran out before ``value - incumbent <= tol``; the
    bound is still valid then, just loose.
    """

    value: float
    incumbent: float
    point: object
    gap: float
    evaluations: int
    certified: bool = True
    reason: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["point"] = np.asarray(self.point).tolist()
        return d


def paraboloid_slope_bound(p: Paraboloid, dom) -> float:
    """1-norm Lipschitz constant of ``p`` on ``dom``.

    Each partial derivative ``2 a_i x_i + b_i`` is affine, so its largest
    magnitude over the box is attained at an endpoint.
    """
    dom = as_box(dom)
    a = np.asarray(p.alpha)
    b = np.asarray(p.beta)
    lo = np.abs(2 * a * dom.a + b)
    hi = np.abs(2 * a * dom.b + b)
    return float(np.max(np.maximum(lo, hi))) if p.n else 0.0


def certify_max(g: Callable, lip: float, dom, tol: float = DEFAULT_TOL,
                threshold: Optional[float] = None, max_evals: int = MAX_EVALS) -> CheckResult:
    """Bound ``max_{x in dom} g(x)`` from above, with a certificate.

    Parameters
    ----------
    g : callable
        Vectorized: takes an array of points (shape ``(m,)`` for a 1-D box,
        ``(m, n)`` otherwise) and returns ``m`` values.
    lip : float
        Lipschitz constant of ``g`` on ``dom`` in the 1-norm.
    tol : float
        Stop once the upper bound is within ``tol`` of the best value seen.
    threshold : float, optional
        Also stop as soon as the bound is ``<= threshold`` or a value above
        ``threshold + tol`` has been found; the result then answers the
        question "is max g <= threshold" without pinning the maximum down.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if lip < 0 or not math.isfinite(lip):
        raise ValueError(f"invalid Lipschitz constant {lip}")
    dom = as_box(dom)
    if dom.n == 1:
        return _sawtooth(g, float(lip), float(dom.a[0]), float(dom.b[0]), tol, threshold, max_evals)
    return _grid(g, float(lip), dom, tol)


def _sawtooth(g, L, a, b, tol, threshold, max_evals) -> CheckResult:
    xs = np.array([a, b]) if b > a else np.array([a])
    vs = np.asarray(g(xs), dtype=float).reshape(-1)
    evals = len(xs)
    if len(xs) == 1 or L == 0.0:
        k = int(np.argmax(vs))
        return CheckResult(float(vs[k]), float(vs[k]), float(xs[k]), 0.0, evals)
    while True:
        h = np.diff(xs)
        upper = 0.5 * (vs[:-1] + vs[1:]) + 0.5 * L * h
        k = int(np.argmax(vs))
        best = float(vs[k])
        bound = max(best, float(upper.max()))
        decided = threshold is not None and (bound <= threshold or best > threshold + tol)
        if bound - best <= tol or decided:
            return CheckResult(bound, best, float(xs[k]), bound - best, evals)
        if evals >= max_evals:
            return CheckResult(bound, best, float(xs[k]), bound - best, evals, False,
                               "evaluation budget exhausted")
        split = np.flatnonzero(upper > best + tol)
        # peak of the two cones meeting inside the interval
        peak = 0.5 * (xs[split] + xs[split + 1]) + (vs[split + 1] - vs[split]) / (2 * L)
        lo, hi = xs[split], xs[split + 1]
        inside = (peak > lo) & (peak < hi)
        peak = np.where(inside, peak, 0.5 * (lo + hi))
        fresh = np.asarray(g(peak), dtype=float).reshape(-1)
        evals += len(peak)
        order = np.argsort(np.concatenate([xs, peak]), kind="stable")
        xs = np.concatenate([xs, peak])[order]
        vs = np.concatenate([vs, fresh])[order]


def _grid(g, L, dom: BoxDomain, tol) -> CheckResult:
    n = dom.n
    w = dom.widths
    # distance (1-norm) from any point to the nearest node is at most sum_i h_i/2
    h_needed = 2.0 * tol / (L * n) if L > 0 else float(np.max(w))
    if h_needed < 1e-12 * float(np.max(w)):
        return CheckResult(math.inf, -math.inf, None, math.inf, 0, False,
                           "required grid spacing underflows")
    counts = np.maximum(1, np.ceil(w / h_needed)).astype(int)
    certified, reason = True, ""
    while float(np.prod(counts.astype(float) + 1)) > MAX_GRID_POINTS:
        counts = np.maximum(1, counts // 2)
        certified, reason = False, "grid capped; bound is valid but looser than tol"
    axes = [np.linspace(lo, hi, k + 1) for lo, hi, k in zip(dom.a, dom.b, counts)]
    h = w / counts
    best, best_pt, evals = -math.inf, None, 0
    # evaluate slab by slab along the first axis to bound memory
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, n - 1)
    for x0 in axes[0]:
        pts = np.column_stack([np.full(len(rest), x0), rest])
        vals = np.asarray(g(pts), dtype=float).reshape(-1)
        evals += len(vals)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, best_pt = float(vals[k]), pts[k].copy()
    radius = L * float(np.sum(h)) / 2.0
    return CheckResult(best + radius, best, best_pt, radius, evals, certified and radius <= tol * (1 + 1e-9), reason)


# ---------------------------------------------------------------------------
# conditions on a set


@dataclass
class ConditionReport:
    coverage: CheckResult                 # max of f - eps - max_l p^l
    one_sided: list = field(default_factory=list)  # per member: max of p^l - f
    passed: bool = False
    tol: float = DEFAULT_TOL
    reason: str = ""

    def __getitem__(self, key):
        # dictionary-style access for report code
        return {"C1": self.coverage, "C2": self.one_sided, "pass": self.passed}[key]

    def to_dict(self) -> dict:
        return {"coverage": self.coverage.to_dict(),
                "one_sided": [r.to_dict() for r in self.one_sided],
                "pass": self.passed, "tol": self.tol, "reason": self.reason}


def check_conditions(pset, func: FuncDef, dom, epsilon: float, side: str = "below",
                     tol: float = DEFAULT_TOL, decide_only: bool = False) -> ConditionReport:
    """Certify that ``pset`` is a valid one-sided ``epsilon``-approximation.

    For ``side="above"`` the set is read as over-estimators ``q`` of ``f``
    and checked as the under-estimators ``-q`` of ``-f``.
    """
    if side not in ("below", "above"):
        raise ValueError(f"side must be 'below' or 'above', got {side!r}")
    dom = as_box(dom)
    pset = ParaboloidSet(pset)
    if not pset:
        raise ValueError("empty paraboloid set")
    L_f = lipschitz_bound(func, dom)
    sign = 1.0 if side == "below" else -1.0
    f = func.fn
    members = pset if side == "below" else pset.flipped()
    thr = 0.0 if decide_only else None

    one_sided = []
    for p in members:
        lip = paraboloid_slope_bound(p, dom) + L_f
        one_sided.append(certify_max(lambda x, p=p: p(x) - sign * f(x), lip, dom, tol, thr))
    lip = max(paraboloid_slope_bound(p, dom) for p in members) + L_f
    coverage = certify_max(lambda x: sign * f(x) - epsilon - members.envelope(x), lip, dom, tol, thr)

    results = one_sided + [coverage]
    refused = [r.reason for r in results if not r.certified]
    passed = all(r.value <= tol for r in results)
    return ConditionReport(coverage, one_sided, passed, tol, "; ".join(sorted(set(refused))))


def dense_max(g: Callable, dom, points: int = 1_000_001) -> tuple:
    """Maximum of ``g`` on a uniform 1-D grid; an uncertified oracle."""
    dom = as_box(dom)
    xs = np.linspace(dom.a[0], dom.b[0], points)
    vals = np.asarray(g(xs), dtype=float)
    k = int(np.argmax(vals))
    return float(vals[k]), float(xs[k])


def lemma_bounds(mode: str, lip: float, dom) -> float:
    """Worst-case extremes of a Lipschitz function on a box.

    ``lower``: if ``g >= 0`` at every vertex, ``min g`` is at least the
    returned value.  ``upper``: if ``g <= 0`` at the vertices and its integral
    over the box is ``<= 0``, ``max g`` is at most the returned value.
    """
    if not lip > 0:
        raise ValueError("Lipschitz constant must be positive")
    dom = as_box(dom)
    n = dom.n
    if mode == "lower":
        return -(lip * n / (n + 1)) * float(np.sum(dom.widths))
    if mode == "upper":
        return (math.sqrt(3.0) - 1.0) / 2.0 * float(np.max(dom.widths)) * n * lip
    raise ValueError(f"mode must be 'lower' or 'upper', got {mode!r}")
