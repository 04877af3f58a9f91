"""Dense bounded-variable primal simplex.

Solves ``min c x  s.t.  row_lo <= A x <= row_hi,  lb <= x <= ub`` by
appending one logical column per row (``A x - w = 0`` with ``w`` boxed by
the row range) so that every constraint becomes a variable bound.  Phase 1
minimizes the sum of bound violations of the basic variables; phase 2
switches to the true cost as soon as the basis is primal feasible.  The
ratio test respects both bounds of every basic variable, so iterates never
leave the box of a feasible variable.

Dantzig pricing is used until ``10 * (#columns)`` consecutive degenerate
pivots have been taken; from then on Bland's smallest-index rule is kept
until the phase ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64


@dataclass
class Basis:
    basic: np.ndarray     # column indices (length m) into [x, w]
    at_upper: np.ndarray  # bool per column, meaningful for nonbasic columns


@dataclass
class LPResult:
    status: str           # optimal | infeasible | unbounded | iteration_limit
    x: Optional[np.ndarray]
    objective: float
    basis: Optional[Basis]
    iterations: int
    degenerate_pivots: int = 0
    bland: bool = False


def _inverse(B):
    if B.shape[0] == 0:
        return np.zeros((0, 0))
    return np.linalg.inv(B)


def _initial_values(zl, zu, at_upper):
    z = np.where(at_upper & np.isfinite(zu), zu, zl)
    z = np.where(np.isfinite(z), z, np.where(np.isfinite(zu), zu, 0.0))
    return z


def solve_lp(c, A, row_lo, row_hi, lb, ub, basis: Optional[Basis] = None,
             max_iter: Optional[int] = None) -> LPResult:
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + PRIMAL_TOL):
        return LPResult("infeasible", None, np.inf, None, 0)
    N = n + m
    M = np.hstack([A, -np.eye(m)])
    zl = np.concatenate([lb, np.asarray(row_lo, dtype=float)])
    zu = np.concatenate([ub, np.asarray(row_hi, dtype=float)])
    cost = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
    if max_iter is None:
        max_iter = 50 * N + 1000

    Binv = None
    if basis is not None and len(basis.basic) == m:
        basic = np.array(basis.basic, dtype=int)
        at_upper = np.array(basis.at_upper, dtype=bool)
        try:
            Binv = _inverse(M[:, basic])
        except np.linalg.LinAlgError:
            Binv = None
    if Binv is None:
        basic = np.arange(n, N)
        at_upper = np.zeros(N, dtype=bool)
        Binv = -np.eye(m)
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basic] = True
    z = _initial_values(zl, zu, at_upper)

    def recompute_basics():
        zz = np.where(is_basic, 0.0, z)
        z[basic] = -Binv @ (M @ zz)

    recompute_basics()
    degenerate = 0
    total_degenerate = 0
    bland = False
    phase = 0
    since_refactor = 0
    it = 0
    while it < max_iter:
        zb = z[basic]
        lo_b, hi_b = zl[basic], zu[basic]
        below = zb < lo_b - PRIMAL_TOL
        above = zb > hi_b + PRIMAL_TOL
        infeasible = below.any() or above.any()
        new_phase = 1 if infeasible else 2
        if new_phase != phase:
            phase = new_phase
            bland = False
            degenerate = 0
        if infeasible:
            cb = above.astype(float) - below.astype(float)
            cN = np.zeros(N)
        else:
            cb = cost[basic]
            cN = cost
        y = cb @ Binv
        d = cN - y @ M
        d[basic] = 0.0
        can_up = ~is_basic & (z < zu - PRIMAL_TOL)
        can_down = ~is_basic & (z > zl + PRIMAL_TOL)
        up = can_up & (d < -DUAL_TOL)
        down = can_down & (d > DUAL_TOL)
        eligible = np.flatnonzero(up | down)
        if eligible.size == 0:
            if infeasible:
                return LPResult("infeasible", None, np.inf, Basis(basic.copy(), at_upper.copy()),
                                it, total_degenerate, bland)
            break
        if bland:
            q = int(eligible[0])
        else:
            q = int(eligible[np.argmax(np.abs(d[eligible]))])
        direction = 1.0 if up[q] else -1.0

        alpha = Binv @ M[:, q]
        rate = -direction * alpha
        ratios = np.full(m, np.inf)
        leave_hi = np.zeros(m, dtype=bool)
        pos = rate > PIVOT_TOL
        neg = rate < -PIVOT_TOL
        feas = ~below & ~above
        # increasing basics: stop at upper bound (feasible) or lower bound (below)
        sel = pos & below
        ratios[sel] = (lo_b[sel] - zb[sel]) / rate[sel]
        sel = pos & feas & np.isfinite(hi_b)
        ratios[sel] = (hi_b[sel] - zb[sel]) / rate[sel]
        leave_hi[sel] = True
        # decreasing basics
        sel = neg & above
        ratios[sel] = (hi_b[sel] - zb[sel]) / rate[sel]
        leave_hi[sel] = True
        sel = neg & feas & np.isfinite(lo_b)
        ratios[sel] = (lo_b[sel] - zb[sel]) / rate[sel]
        np.maximum(ratios, 0.0, out=ratios)

        t_flip = zu[q] - zl[q]
        t_row = ratios.min() if m else np.inf
        if not np.isfinite(t_row) and not np.isfinite(t_flip):
            if infeasible:
                # cannot happen for a consistent phase-1 direction; treat as stall
                return LPResult("infeasible", None, np.inf, None, it, total_degenerate, bland)
            return LPResult("unbounded", None, -np.inf, None, it, total_degenerate, bland)

        it += 1
        if t_flip <= t_row:
            t = t_flip
            z[basic] += t * rate
            at_upper[q] = direction > 0
            z[q] = zu[q] if at_upper[q] else zl[q]
        else:
            t = t_row
            ties = np.flatnonzero(ratios <= t_row + 1e-12)
            if bland:
                p = int(ties[np.argmin(basic[ties])])
            else:
                p = int(ties[np.argmax(np.abs(rate[ties]))])
            leaving = basic[p]
            z[basic] += t * rate
            z[q] += direction * t
            at_upper[leaving] = bool(leave_hi[p])
            z[leaving] = zu[leaving] if leave_hi[p] else zl[leaving]
            is_basic[leaving] = False
            is_basic[q] = True
            basic[p] = q
            piv = alpha[p]
            row = Binv[p] / piv
            Binv -= np.outer(alpha, row)
            Binv[p] = row
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                Binv = _inverse(M[:, basic])
                recompute_basics()
                since_refactor = 0
        if t <= 1e-12:
            degenerate += 1
            total_degenerate += 1
            if degenerate > 10 * N:
                bland = True
        else:
            degenerate = 0
    else:
        return LPResult("iteration_limit", None, np.nan, None, it, total_degenerate, bland)

    Binv = _inverse(M[:, basic])
    recompute_basics()
    x = z[:n].copy()
    # snap to bounds where the recomputation leaves tiny drift
    x = np.minimum(np.maximum(x, lb), ub)
    return LPResult("optimal", x, float(cost[:n] @ x), Basis(basic.copy(), at_upper.copy()),
                    it, total_degenerate, bland)
