"""Brute-force reference optimizer for tiny instances.

Integer assignments are enumerated; continuous variables are gridded and the
best feasible grid point is refined twice on a shrinking box around it.
Auxiliary variables of a relaxation are not gridded: for ``para`` they are
sampled inside their bracket ``[max_l p^l, min_m q^m]`` at each point, for
``both`` they equal the term they stand for.

The reported resolution is the objective change over one coarse grid step.
It is a heuristic radius, not a proof.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expr import evaluate
from .instance import MinlpInstance
from .relaxation import RelaxedInstance

MAX_CONTINUOUS = 3
MAX_INTEGER_COMBOS = 8
MAX_GRID = 10_000
CHUNK = 1_000_000
AUX_SAMPLES = 5


class ScaleError(ValueError):
    """Instance too large for enumeration."""


@dataclass
class OracleResult:
    value: float
    point: Optional[dict]
    resolution: float
    evaluations: int
    wall_time: float

    @property
    def feasible(self) -> bool:
        return self.point is not None


def _violation(inst: MinlpInstance, env: dict, n: int) -> np.ndarray:
    worst = np.zeros(n)
    for c in inst.constraints:
        val = np.broadcast_to(np.asarray(evaluate(c.body, env), dtype=float), (n,))
        if c.sense == "<=":
            v = val - c.rhs
        elif c.sense == ">=":
            v = c.rhs - val
        else:
            v = np.abs(val - c.rhs)
        worst = np.maximum(worst, np.where(np.isnan(v), np.inf, v))
    return worst


def _aux_candidates(relaxed: RelaxedInstance, env: dict, n: int):
    """Per aux variable, an array ``(samples, n)`` of candidate values (NaN = empty bracket)."""
    out = {}
    inst = relaxed.instance
    for spec in relaxed.aux:
        sub = spec.sub
        w = sub.scale * env[sub.var] + sub.offset
        var = inst.var(spec.name)
        if relaxed.variant == "both":
            node = next(c for c in relaxed.instance.constraints if c.name == f"{spec.name}_link")
            # body is z - f(w); evaluating with z = 0 gives -f(w)
            vals = -np.broadcast_to(evaluate(node.body, dict(env, **{spec.name: 0.0})), (n,))
            out[spec.name] = vals[None, :]
            continue
        lo = np.maximum(var.lb, np.max([p(w) for p in sub.below_set], axis=0))
        hi = np.minimum(var.ub, np.min([q(w) for q in sub.above_set], axis=0))
        t = np.linspace(0.0, 1.0, AUX_SAMPLES)[:, None]
        cand = lo[None, :] + t * (hi - lo)[None, :]
        cand[:, hi < lo] = np.nan
        out[spec.name] = cand
    return out


def brute_force_minlp(problem, grid_n: int = 201, feas_tol: float = 1e-9,
                      refine_rounds: int = 2) -> OracleResult:
    """Approximate optimum of a tiny instance or relaxation."""
    start = time.perf_counter()
    relaxed = problem if isinstance(problem, RelaxedInstance) else None
    inst = relaxed.instance if relaxed else problem
    aux_names = {a.name for a in relaxed.aux} if relaxed else set()
    primary = [v for v in inst.variables if v.name not in aux_names]
    cont = [v for v in primary if not v.integer]
    ints = [v for v in primary if v.integer]
    if len(cont) > MAX_CONTINUOUS:
        raise ScaleError(f"{len(cont)} continuous variables; at most {MAX_CONTINUOUS} supported")
    if grid_n > MAX_GRID or grid_n < 2:
        raise ScaleError(f"grid_n must lie in [2, {MAX_GRID}]")
    ranges = [range(math.ceil(v.lb), math.floor(v.ub) + 1) for v in ints]
    combos = math.prod(len(r) for r in ranges)
    if combos > MAX_INTEGER_COMBOS:
        raise ScaleError(f"{combos} integer combinations; at most {MAX_INTEGER_COMBOS} supported")

    obj = inst.objective
    best = (math.inf, None)
    evals = 0

    def search(box, fixed):
        nonlocal evals
        axes = [np.linspace(lo, hi, grid_n) if hi > lo else np.array([lo]) for lo, hi in box]
        total = math.prod(len(a) for a in axes)
        found = (math.inf, None)
        for first in range(0, total, CHUNK):
            idx = np.arange(first, min(total, first + CHUNK))
            coords = np.unravel_index(idx, [len(a) for a in axes]) if axes else ()
            n = len(idx)
            env = {v.name: axes[i][coords[i]] for i, v in enumerate(cont)}
            env.update({k: np.full(n, float(val)) for k, val in fixed.items()})
            objective = np.full(n, inst.objective_constant)
            for k, c in obj.items():
                objective = objective + c * env[k]
            if relaxed and relaxed.aux:
                cands = _aux_candidates(relaxed, env, n)
                names = list(cands)
                ok = np.zeros(n, dtype=bool)
                choice = {k: np.full(n, np.nan) for k in names}
                for pick in itertools.product(*[range(cands[k].shape[0]) for k in names]):
                    trial = dict(env, **{k: cands[k][j] for k, j in zip(names, pick)})
                    good = ~ok & (_violation(inst, trial, n) <= feas_tol)
                    for k, j in zip(names, pick):
                        good &= ~np.isnan(cands[k][j])
                    for k, j in zip(names, pick):
                        choice[k] = np.where(good, cands[k][j], choice[k])
                    ok |= good
                    evals += n
                env.update(choice)
            else:
                ok = _violation(inst, env, n) <= feas_tol
                evals += n
            if ok.any():
                vals = np.where(ok, objective, np.inf)
                k = int(np.argmin(vals))
                if vals[k] < found[0]:
                    found = (float(vals[k]), {name: float(np.asarray(env[name])[k]) for name in env})
        return found

    for combo in itertools.product(*ranges):
        fixed = {v.name: float(x) for v, x in zip(ints, combo)}
        box = [(v.lb, v.ub) for v in cont]
        cand = search(box, fixed)
        for _ in range(refine_rounds):
            if cand[1] is None:
                break
            steps = [(hi - lo) / (grid_n - 1) for lo, hi in box]
            box = [(max(v.lb, cand[1][v.name] - 2 * h), min(v.ub, cand[1][v.name] + 2 * h))
                   for v, h in zip(cont, steps)]
            finer = search(box, fixed)
            if finer[0] <= cand[0]:
                cand = finer
        if cand[0] < best[0]:
            best = cand
    steps = [(v.ub - v.lb) / (grid_n - 1) for v in cont]
    resolution = sum(abs(obj.get(v.name, 0.0)) * h for v, h in zip(cont, steps))
    return OracleResult(best[0], best[1], resolution, evals, time.perf_counter() - start)
