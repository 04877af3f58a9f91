"""Best-first branch and bound over the bounded-variable simplex.

Branching is on the most fractional integer variable (binaries included);
each child LP is warm-started
from its parent's basis and solved as soon as the child is created, so the
heap is keyed by a true LP bound.  Ties in the bound are broken by creation
order, which makes the search deterministic.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import MilpModel, MilpSolution, ModelError
from .simplex import solve_lp

INT_TOL = 1e-6
FEAS_TOL = 1e-6
GAP_TOL = 1e-8


@dataclass
class Limits:
    time: float = math.inf
    nodes: int = 1_000_000
    max_binaries: int = 1000
    max_continuous: int = 200_000


class SizeLimitExceeded(RuntimeError):
    def __init__(self, binaries: int, continuous: int, limits: Limits):
        super().__init__(
            f"model has {binaries} binaries / {continuous} continuous variables, "
            f"caps are {limits.max_binaries} / {limits.max_continuous}"
        )
        self.binaries = binaries
        self.continuous = continuous


def exceeds_size(model: MilpModel, limits: Limits) -> bool:
    return (model.num_binaries > limits.max_binaries
            or model.num_continuous > limits.max_continuous)


def _assignment(model: MilpModel, x: np.ndarray) -> dict:
    out = {}
    for var, val in zip(model.variables, x):
        out[var.name] = float(round(val)) if var.is_integral else float(val)
    return out


def solve_milp(model: MilpModel, limits: Optional[Limits] = None,
               backend: str = "builtin") -> MilpSolution:
    """Solve ``model`` to proven optimality within ``limits``.

    ``backend`` selects the built-in branch and bound (``"builtin"``) or
    HiGHS through :func:`scipy.optimize.milp` (``"highs"``).  Models above
    the size caps are rejected with status ``size_limit`` before any work.
    """
    limits = limits or Limits()
    start = time.perf_counter()
    if exceeds_size(model, limits):
        return MilpSolution("size_limit", stats={
            "binaries": model.num_binaries, "continuous": model.num_continuous,
            "nodes": 0, "simplex_iterations": 0, "wall_time": 0.0})
    c, A, row_lo, row_hi, lb, ub, binary = model.arrays()
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ModelError("all variables need finite bounds")
    if backend == "highs":
        sol = _solve_highs(model, limits)
    elif backend == "builtin":
        sol = _branch_and_bound(model, limits, start)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    sol.stats["wall_time"] = time.perf_counter() - start
    sol.stats["backend"] = backend
    return sol


def _branch_and_bound(model: MilpModel, limits: Limits, start: float) -> MilpSolution:
    c, A, row_lo, row_hi, lb, ub, binary = model.arrays()
    A = A.toarray()
    bin_idx = np.flatnonzero(binary)
    counter = itertools.count()
    stats = {"nodes": 0, "simplex_iterations": 0, "degenerate_pivots": 0, "bland": False}

    incumbent_x = None
    incumbent = math.inf
    heap = []

    def evaluate(node_lb, node_ub, basis):
        res = solve_lp(c, A, row_lo, row_hi, node_lb, node_ub, basis=basis)
        stats["nodes"] += 1
        stats["simplex_iterations"] += res.iterations
        stats["degenerate_pivots"] += res.degenerate_pivots
        stats["bland"] = stats["bland"] or res.bland
        if res.status == "unbounded":
            raise ModelError("LP relaxation is unbounded")
        return res

    def consider(node_lb, node_ub, res):
        nonlocal incumbent, incumbent_x
        if res.status != "optimal" or res.objective >= incumbent - GAP_TOL:
            return
        frac = np.abs(res.x[bin_idx] - np.round(res.x[bin_idx]))
        if frac.size == 0 or frac.max() <= INT_TOL:
            x = res.x.copy()
            x[bin_idx] = np.round(x[bin_idx])
            incumbent, incumbent_x = res.objective, x
            return
        heapq.heappush(heap, (res.objective, next(counter), node_lb, node_ub, res))

    root = evaluate(lb.copy(), ub.copy(), None)
    stats["root_bound"] = root.objective
    consider(lb.copy(), ub.copy(), root)
    status = None
    while heap:
        if time.perf_counter() - start > limits.time:
            status = "time_limit"
            stats["limit_reason"] = "time"
            break
        if stats["nodes"] >= limits.nodes:
            status = "time_limit"
            stats["limit_reason"] = "nodes"
            break
        bound, _, node_lb, node_ub, res = heapq.heappop(heap)
        if bound >= incumbent - GAP_TOL:
            continue
        xb = res.x[bin_idx]
        # most fractional; lowest index on ties
        j = int(bin_idx[np.argmin(np.round(np.abs(xb - np.floor(xb) - 0.5), 12))])
        down, up = math.floor(res.x[j]), math.ceil(res.x[j])
        for side in (0, 1):
            child_lb, child_ub = node_lb.copy(), node_ub.copy()
            if side == 0:
                child_ub[j] = down
            else:
                child_lb[j] = up
            child = evaluate(child_lb, child_ub, res.basis)
            consider(child_lb, child_ub, child)

    if status is None:
        status = "optimal" if incumbent_x is not None else "infeasible"
    stats["open_nodes"] = len(heap)
    if incumbent_x is None:
        return MilpSolution(status, {}, math.nan, stats)
    obj = float(c @ incumbent_x) + model.objective_constant
    return MilpSolution(status, _assignment(model, incumbent_x), obj, stats)


def _solve_highs(model: MilpModel, limits: Limits) -> MilpSolution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    c, A, row_lo, row_hi, lb, ub, binary = model.arrays()
    options = {"mip_rel_gap": 0.0, "presolve": True}
    if math.isfinite(limits.time):
        options["time_limit"] = float(limits.time)
    if limits.nodes < 1_000_000:
        options["node_limit"] = int(limits.nodes)
    constraints = [LinearConstraint(A, row_lo, row_hi)] if A.shape[0] else []
    res = milp(c, constraints=constraints, integrality=binary.astype(int),
               bounds=Bounds(lb, ub), options=options)
    stats = {"nodes": getattr(res, "mip_node_count", None),
             "simplex_iterations": None, "highs_status": int(res.status),
             "highs_message": res.message}
    if res.status == 0:
        return MilpSolution("optimal", _assignment(model, res.x),
                            float(res.fun) + model.objective_constant, stats)
    if res.status == 2:
        return MilpSolution("infeasible", {}, math.nan, stats)
    if res.status == 1:
        stats["limit_reason"] = "time"
        if res.x is not None:
            return MilpSolution("time_limit", _assignment(model, res.x),
                                float(res.fun) + model.objective_constant, stats)
        return MilpSolution("time_limit", {}, math.nan, stats)
    raise ModelError(f"HiGHS failed: {res.message}")
