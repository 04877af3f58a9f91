"""Fitting small sets of paraboloids that approximate a function from below.

The fitting model asks for ``K`` paraboloids such that

* at every point ``t`` of a coarse grid some selected paraboloid is within
  ``delta`` of ``f`` (binary selection variables, big-M switched);
* every paraboloid stays ``nu * eps`` below ``f`` on a fine grid;
* violations of the integral of ``p - (f - nu eps)`` over each fine cell are
  penalized in the objective;
* slopes are capped by ``C`` at the box corners and, near selected points,
  by ``2L``.

An objective of zero certifies, by Lipschitz arguments, that the envelope
``max_l p^l`` lies in ``[f - eps, f]``.  Two searches over ``K`` are
provided: a doubling-then-bisection search on the exact model and an
adaptive search on a relaxed model whose output is checked with
:mod:`paraprox.verify` and repaired by downward shifts.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import verify
from .funcspace import BoxDomain, FuncDef, as_box, integral_measure, lipschitz_bound
from .milp import BINARY, Limits, MilpModel, ModelError, solve_milp
from .paraboloid import Paraboloid, ParaboloidSet

log = logging.getLogger(__name__)

SIDES = ("below", "above")
MODES = ("exact", "practical", "theorem")


class ResolutionError(ValueError):
    """Grid widths became too small to represent."""


class FitSizeError(ValueError):
    """The fitting model exceeds the configured size caps."""

    def __init__(self, binaries: int, continuous: int):
        super().__init__(f"fit model too large: {binaries} binaries, {continuous} continuous")
        self.binaries = binaries
        self.continuous = continuous


# ---------------------------------------------------------------------------
# parameters and grids


@dataclass
class FitParams:
    epsilon: float
    delta: float
    nu: float
    C: float
    L: float
    side: str = "below"
    mode: str = "exact"
    kappa: Optional[float] = 10.0
    width: Optional[float] = None   # common grid width in theorem mode
    alpha_max: tuple = ()
    beta_max: tuple = ()
    gamma_lo: float = -math.inf
    gamma_hi: float = math.inf
    M1: float = math.nan
    M2: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < self.epsilon:
            raise ValueError(f"delta must lie in (0, eps), got {self.delta}")
        if not 0 < self.nu < self.delta / self.epsilon:
            raise ValueError(f"nu must lie in (0, delta/eps), got {self.nu}")
        if self.C < self.L:
            raise ValueError(f"slope cap C={self.C} is below the Lipschitz constant {self.L}")
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GridSpec:
    """Coarse grid (coverage) and fine grid (one-sidedness) on a box.

    ``t_counts[i]`` and ``d_counts[i]`` are the numbers of cells along axis
    ``i``; the widths divide the box exactly by construction.
    """

    dom: BoxDomain
    t_counts: tuple
    d_counts: tuple

    def __post_init__(self):
        self.t_counts = tuple(int(k) for k in np.broadcast_to(self.t_counts, (self.dom.n,)))
        self.d_counts = tuple(int(k) for k in np.broadcast_to(self.d_counts, (self.dom.n,)))
        if min(self.t_counts + self.d_counts) < 1:
            raise ValueError("grids need at least one cell per axis")

    @property
    def dt(self) -> np.ndarray:
        return self.dom.widths / np.asarray(self.t_counts)

    @property
    def dd(self) -> np.ndarray:
        return self.dom.widths / np.asarray(self.d_counts)

    @staticmethod
    def _points(dom, counts) -> np.ndarray:
        axes = [lo + (hi - lo) * np.arange(k + 1) / k
                for lo, hi, k in zip(dom.lower, dom.upper, counts)]
        for ax, hi in zip(axes, dom.upper):
            ax[-1] = hi
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dom.n)

    @property
    def eps_grid(self) -> np.ndarray:
        return self._points(self.dom, self.t_counts)

    @property
    def int_grid(self) -> np.ndarray:
        return self._points(self.dom, self.d_counts)

    def neighbors(self, k: int) -> list:
        """Indices of coarse points that differ from point ``k`` by one step in every axis."""
        shape = tuple(c + 1 for c in self.t_counts)
        idx = np.unravel_index(k, shape)
        out = []
        for u in itertools.product((-1, 1), repeat=self.dom.n):
            j = tuple(i + s for i, s in zip(idx, u))
            if all(0 <= ji < n for ji, n in zip(j, shape)):
                out.append(int(np.ravel_multi_index(j, shape)))
        return out

    def cells(self) -> list:
        """``(lo, hi)`` corner pairs of the fine cells ``[d, d + dd]``."""
        axes = [lo + (hi - lo) * np.arange(k + 1) / k
                for lo, hi, k in zip(self.dom.lower, self.dom.upper, self.d_counts)]
        for ax, hi in zip(axes, self.dom.upper):
            ax[-1] = hi
        out = []
        for combo in itertools.product(*[range(k) for k in self.d_counts]):
            lo = np.array([axes[i][c] for i, c in enumerate(combo)])
            hi = np.array([axes[i][c + 1] for i, c in enumerate(combo)])
            out.append((lo, hi))
        return out

    @property
    def num_eps_points(self) -> int:
        return int(np.prod([k + 1 for k in self.t_counts]))

    @property
    def num_int_points(self) -> int:
        return int(np.prod([k + 1 for k in self.d_counts]))

    def to_dict(self) -> dict:
        return {"domain": self.dom.to_list(), "t_counts": list(self.t_counts),
                "d_counts": list(self.d_counts), "dt": self.dt.tolist(), "dd": self.dd.tolist()}


def _cells_for(width: float, raw: float, what: str) -> int:
    if not raw > 1e-12 * width:
        raise ResolutionError(f"{what} width {raw:.3g} underflows for a box of width {width:.3g}")
    return max(1, math.ceil(width / raw - 1e-9))


def build_grids(dom, dt, dd) -> GridSpec:
    """Grids with the given widths; every width must divide its box edge."""
    dom = as_box(dom)
    counts = []
    for widths in (dt, dd):
        w = np.broadcast_to(np.asarray(widths, dtype=float), (dom.n,))
        k = dom.widths / w
        if np.any(w <= 0) or np.any(np.abs(k - np.round(k)) > 1e-9 * np.maximum(1, k)):
            raise ValueError(f"widths {w.tolist()} do not divide the box {dom.to_list()}")
        counts.append(tuple(int(round(v)) for v in k))
    return GridSpec(dom, counts[0], counts[1])


def _coefficient_boxes(params: FitParams, func: FuncDef, dom: BoxDomain, grids: GridSpec) -> None:
    """Fill in coefficient bounds and big-M values; see the module docs."""
    W = dom.widths
    C = params.C
    far = np.maximum(np.abs(dom.a), np.abs(dom.b))
    amax = C / W
    bmax = C * (1 + 2 * far / W)
    S = float(np.sum(amax * far ** 2 + bmax * far))
    L_f = params.L
    # a certified lower bound on min f over the box
    if dom.n == 1:
        fmin = -verify.certify_max(lambda x: -func.fn(x), L_f, dom, 1e-6).value
    else:
        pts = grids.int_grid
        fmin = float(np.min(func.fn(pts))) - L_f * float(np.sum(grids.dd)) / 2
    f_eps = func.fn(_squeeze(grids.eps_grid))
    f_int = func.fn(_squeeze(grids.int_grid))
    params.alpha_max = tuple(float(v) for v in amax)
    params.beta_max = tuple(float(v) for v in bmax)
    params.gamma_lo = fmin - params.epsilon - S
    params.gamma_hi = float(np.max(f_int)) - params.nu * params.epsilon + S
    params.M1 = (float(np.max(f_eps)) - params.delta) - (params.gamma_lo - S)
    params.M2 = C
    params.diagnostics["S"] = S
    params.diagnostics["f_min_bound"] = fmin


def _squeeze(points: np.ndarray) -> np.ndarray:
    return points[:, 0] if points.shape[1] == 1 else points


def derive_params(func: FuncDef, dom, epsilon: float, side: str = "below", mode: str = "exact",
                  delta_frac: Optional[float] = None, nu_frac: Optional[float] = None,
                  kappa: float = 10.0, counts: Optional[tuple] = None):
    """Parameters, grids and the trivial upper bound ``K_bar`` on the count.

    ``mode`` selects the parameter rules:

    ``exact``
        ``delta = eps/2``, ``nu = delta/(2 eps)``, ``C = kappa L``; grid widths
        from the coverage and one-sidedness width bounds, shrunk to divisors.
    ``practical``
        A looser tube ``delta = 0.9 eps``, ``nu = 0.1 delta/eps``; the grids
        start at ``ceil(L W / (10 eps))`` cells (or ``counts = (T, D)``).
    ``theorem``
        One common width ``Delta`` for both grids and ``C = 2 L W_max / Delta``,
        which admits an explicit zero-objective solution.  The one-sidedness
        width bound involves ``C`` itself; whether it holds is recorded in
        ``params.diagnostics["width_bound_satisfied"]``.

    Returns
    -------
    (FitParams, GridSpec, int)
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    dom = as_box(dom)
    func.check_box(dom)
    n = dom.n
    L = lipschitz_bound(func, dom)
    if not L > 0:
        L = 1e-12  # constant functions: any positive constant is valid
    W = dom.widths
    if delta_frac is None:
        delta_frac = 0.9 if mode == "practical" else 0.5
    if nu_frac is None:
        nu_frac = 0.1 if mode == "practical" else 0.5
    delta = delta_frac * epsilon
    nu = nu_frac * delta / epsilon
    width_t = (n + 1) / n ** 2 * (epsilon - delta) / (3 * L)

    diagnostics = {}
    if mode == "theorem":
        raw = min(width_t, 2 * delta / (n * L))
        t_counts = tuple(_cells_for(w, raw, "grid") for w in W)
        widths = W / np.asarray(t_counts)
        C = 2 * L * float(np.max(W / widths))
        bound2 = 2 * nu * epsilon / ((math.sqrt(3) - 1) * n * (C + L))
        diagnostics.update(width_bound=bound2, width_bound_satisfied=bool(np.all(widths <= bound2)))
        params = FitParams(epsilon, delta, nu, C, L, side, mode, None, float(np.min(widths)))
        d_counts = t_counts
    else:
        C = kappa * L
        params = FitParams(epsilon, delta, nu, C, L, side, mode, kappa)
        if counts is not None:
            t_counts, d_counts = (tuple(np.broadcast_to(c, (n,))) for c in counts)
        elif mode == "practical":
            start = tuple(max(1, math.ceil(L * w / (10 * epsilon))) for w in W)
            t_counts = d_counts = start
        else:
            width_d = 2 * nu * epsilon / ((math.sqrt(3) - 1) * n * (C + L))
            t_counts = tuple(_cells_for(w, width_t, "coverage grid") for w in W)
            d_counts = tuple(_cells_for(w, width_d, "integral grid") for w in W)
    params.diagnostics.update(diagnostics)
    params.validate()
    grids = GridSpec(dom, t_counts, d_counts)
    _coefficient_boxes(params, func, dom, grids)
    # one paraboloid per coverage point always suffices in theory
    exact_counts = tuple(_cells_for(w, width_t, "coverage grid") for w in W)
    k_bar = int(np.prod([k + 1 for k in (t_counts if mode != "practical" else exact_counts)]))
    return params, grids, k_bar


# ---------------------------------------------------------------------------
# the model


def _names(l: int, n: int):
    return ([f"alpha_l{l}_i{i}" for i in range(n)], [f"beta_l{l}_i{i}" for i in range(n)],
            f"gamma_l{l}")


def _value_row(alphas, betas, gamma, x) -> dict:
    row = {a: float(xi * xi) for a, xi in zip(alphas, x)}
    for b, xi in zip(betas, x):
        row[b] = row.get(b, 0.0) + float(xi)
    row[gamma] = 1.0
    return row


def build_fit_model(func: FuncDef, dom, K: int, params: FitParams, grids: GridSpec,
                    drop_slope_neighbors: bool = False, symmetry_break: bool = True,
                    limits: Optional[Limits] = None) -> MilpModel:
    """Linear model with binaries for ``K`` below-approximating paraboloids."""
    if K < 1:
        raise ValueError("K must be at least 1")
    dom = as_box(dom)
    n = dom.n
    limits = limits or Limits()
    T_pts = grids.eps_grid
    cells = grids.cells()
    nb = K * len(T_pts)
    nc = K * (2 * n + 1 + len(cells))
    if nb > limits.max_binaries or nc > limits.max_continuous:
        raise FitSizeError(nb, nc)
    D_pts = grids.int_grid
    eps, delta, nu, C, L = params.epsilon, params.delta, params.nu, params.C, params.L
    f_t = np.atleast_1d(func.fn(_squeeze(T_pts)))
    f_d = np.atleast_1d(func.fn(_squeeze(D_pts)))
    mu = np.array([integral_measure(func, (lo, hi)) for lo, hi in cells])
    vol = np.array([float(np.prod(hi - lo)) for lo, hi in cells])
    S = params.diagnostics["S"]
    v_ub = np.maximum(0.0, (params.gamma_hi + S) * vol - mu + nu * eps * vol) + 1.0

    m = MilpModel(f"fit_{func.id}_K{K}")
    for l in range(K):
        alphas, betas, gamma = _names(l, n)
        for i in range(n):
            m.add_var(alphas[i], lb=-params.alpha_max[i], ub=params.alpha_max[i])
        for i in range(n):
            m.add_var(betas[i], lb=-params.beta_max[i], ub=params.beta_max[i])
        m.add_var(gamma, lb=params.gamma_lo, ub=params.gamma_hi)
        for k in range(len(T_pts)):
            m.add_var(f"s_l{l}_t{k}", BINARY, 0.0, 1.0)
        for k in range(len(cells)):
            m.add_var(f"v_l{l}_d{k}", lb=0.0, ub=float(v_ub[k]))

    M1, M2 = params.M1, params.M2
    for l in range(K):
        alphas, betas, gamma = _names(l, n)
        for k, t in enumerate(T_pts):
            s = f"s_l{l}_t{k}"
            row = _value_row(alphas, betas, gamma, t)
            row[s] = -M1
            m.add_constr(row, ">=", f_t[k] - delta - M1, f"cover_l{l}_t{k}")
            if drop_slope_neighbors:
                continue
            for j in grids.neighbors(k):
                tp = T_pts[j]
                for i in range(n):
                    slope = {alphas[i]: 2 * tp[i], betas[i]: 1.0}
                    m.add_constr({**slope, s: M2}, "<=", 2 * L + M2, f"nbhi_l{l}_t{k}_n{j}_i{i}")
                    neg = {v: -c for v, c in slope.items()}
                    m.add_constr({**neg, s: M2}, "<=", 2 * L + M2, f"nblo_l{l}_t{k}_n{j}_i{i}")
        for k, d in enumerate(D_pts):
            m.add_constr(_value_row(alphas, betas, gamma, d), "<=", f_d[k] - nu * eps, f"under_l{l}_d{k}")
        for k, (lo, hi) in enumerate(cells):
            row = {gamma: vol[k]}
            for i in range(n):
                others = vol[k] / (hi[i] - lo[i])
                row[alphas[i]] = others * (hi[i] ** 3 - lo[i] ** 3) / 3.0
                row[betas[i]] = others * (hi[i] ** 2 - lo[i] ** 2) / 2.0
            row[f"v_l{l}_d{k}"] = -1.0
            m.add_constr(row, "<=", mu[k] - nu * eps * vol[k], f"integral_l{l}_d{k}")
        for tag, corner in (("a", dom.a), ("b", dom.b)):
            for i in range(n):
                slope = {alphas[i]: 2 * corner[i], betas[i]: 1.0}
                m.add_constr(slope, "<=", C, f"slope{tag}hi_l{l}_i{i}")
                m.add_constr(slope, ">=", -C, f"slope{tag}lo_l{l}_i{i}")
        if symmetry_break and l + 1 < K:
            m.add_constr({gamma: 1.0, _names(l + 1, n)[2]: -1.0}, "<=", 0.0, f"order_l{l}")
    for k in range(len(T_pts)):
        m.add_constr({f"s_l{l}_t{k}": 1.0 for l in range(K)}, ">=", 1.0, f"select_t{k}")
    m.set_objective({f"v_l{l}_d{k}": 1.0 for l in range(K) for k in range(len(cells))})
    return m


def extract_paraboloids(assignment: dict, K: int, n: int) -> ParaboloidSet:
    out = []
    for l in range(K):
        alphas, betas, gamma = _names(l, n)
        out.append(Paraboloid([assignment[a] for a in alphas], [assignment[b] for b in betas],
                              assignment[gamma]))
    return ParaboloidSet(out)


def paraboloid_assignment(pset: ParaboloidSet, func: FuncDef, params: FitParams,
                          grids: GridSpec, selection: Optional[np.ndarray] = None) -> dict:
    """Complete variable assignment for a given set.

    ``selection[l, k]`` picks the binaries; by default a paraboloid is
    selected at a coarse point when it is within ``delta`` of ``f`` there.
    The integral variables take their smallest feasible values.
    """
    n = grids.dom.n
    T_pts = grids.eps_grid
    f_t = np.atleast_1d(func.fn(_squeeze(T_pts)))
    cells = grids.cells()
    point = {}
    for l, p in enumerate(pset):
        alphas, betas, gamma = _names(l, n)
        point.update(zip(alphas, p.alpha))
        point.update(zip(betas, p.beta))
        point[gamma] = p.gamma
        vals = np.atleast_1d(p(_squeeze(T_pts)))
        for k in range(len(T_pts)):
            if selection is not None:
                on = bool(selection[l, k])
            else:
                on = vals[k] >= f_t[k] - params.delta - 1e-12
            point[f"s_l{l}_t{k}"] = 1.0 if on else 0.0
        for k, (lo, hi) in enumerate(cells):
            vol = float(np.prod(hi - lo))
            gap = p.integral(lo, hi) - (integral_measure(func, (lo, hi)) - params.nu * params.epsilon * vol)
            point[f"v_l{l}_d{k}"] = max(0.0, gap)
    return point


def constructive_solution(func: FuncDef, dom, params: FitParams, grids: GridSpec,
                          sort_by_gamma: bool = True):
    """One explicit paraboloid per coverage point, in theorem-mode parameters.

    Each paraboloid is a downward parabola of curvature ``L/Delta`` per axis
    peaking at its own grid point ``t``, lowered so that ``p(t) = f(t) - delta``.

    Returns
    -------
    (ParaboloidSet, selection) where ``selection[l, k]`` is 1 iff paraboloid
    ``l`` was built at point ``k``.
    """
    dom = as_box(dom)
    widths = grids.dt
    T_pts = grids.eps_grid
    f_t = np.atleast_1d(func.fn(_squeeze(T_pts)))
    L = params.L
    items = []
    for k, t in enumerate(T_pts):
        alpha = -L / widths
        beta = 2 * L * t / widths
        gamma = f_t[k] - params.delta - float(np.sum(alpha * t * t + beta * t))
        items.append((gamma, k, Paraboloid(tuple(alpha), tuple(beta), gamma)))
    if sort_by_gamma:
        items.sort(key=lambda it: (it[0], it[1]))
    pset = ParaboloidSet(p for _, _, p in items)
    selection = np.zeros((len(items), len(T_pts)), dtype=int)
    for l, (_, k, _) in enumerate(items):
        selection[l, k] = 1
    return pset, selection


# ---------------------------------------------------------------------------
# searches


def flip_side(pset) -> ParaboloidSet:
    """Negate every coefficient: below-approximations of ``-f`` become above-approximations of ``f``."""
    return ParaboloidSet(pset).flipped()


def negated_function(func: FuncDef) -> FuncDef:
    return FuncDef(
        id=f"-{func.id}", fn=lambda x: -func.fn(x), lipschitz_rule=func.lipschitz_rule,
        measure_rule=lambda box: -func.measure_rule(box), admissible=func.admissible, n=func.n,
        derivative=None if func.derivative is None else (lambda x: -func.derivative(x)),
        meta=dict(func.meta, negated=func.id))


@dataclass
class SearchState:
    K: int = 1
    K_bar: int = 1
    K_star: Optional[int] = None
    T: tuple = ()
    D: tuple = ()
    T0: tuple = ()
    D0: tuple = ()
    coverage_ok: bool = False    # joint coverage condition holds
    one_sided_ok: bool = False   # every member stays below f
    c_members: list = field(default_factory=list)
    c_joint: Optional[float] = None


@dataclass
class FitReport:
    func: str
    domain: list
    epsilon: float
    side: str
    method: str
    status: str = "running"      # certified | failed | limit
    K: Optional[int] = None
    coefficients: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    iterations: list = field(default_factory=list)
    check: dict = field(default_factory=dict)
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def paraboloids(self) -> ParaboloidSet:
        return ParaboloidSet.from_list(self.coefficients)

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
            for it in d["iterations"]:
                it.pop("time", None)
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(_jsonable(self.to_dict(timing)), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


@dataclass
class SearchOptions:
    backend: str = "highs"
    solve_time: float = 600.0        # seconds per MIP solve
    max_binaries: int = 1000
    max_continuous: int = 200_000
    symmetry_break: bool = True
    kappa: float = 10.0
    delta_frac: Optional[float] = None
    nu_frac: Optional[float] = None
    # adaptive search
    iteration_limit: int = 24
    time_budget: Optional[float] = None  # wall seconds for the whole practical search
    growth: float = 1.5
    refine: str = "diagnose"         # diagnose | printed | swapped
    shift_rule: str = "max"          # max | min (literal sign of the check value)
    cert_tol: float = verify.DEFAULT_TOL

    def limits(self) -> Limits:
        return Limits(time=self.solve_time, max_binaries=self.max_binaries,
                      max_continuous=self.max_continuous)


def _zero_threshold(grids: GridSpec) -> float:
    return 1e-7 * max(1, grids.num_int_points)


def _solve_fit(func, dom, K, params, grids, opts: SearchOptions, drop_slope_neighbors: bool):
    """One MIP solve; returns (success, pset or None, log entry)."""
    entry = {"K": K, "T": list(grids.t_counts), "D": list(grids.d_counts)}
    start = time.perf_counter()
    try:
        model = build_fit_model(func, dom, K, params, grids, drop_slope_neighbors,
                                opts.symmetry_break, opts.limits())
    except FitSizeError as exc:
        entry.update(status="size_limit", binaries=exc.binaries, continuous=exc.continuous,
                     time=time.perf_counter() - start)
        return False, None, entry
    sol = solve_milp(model, opts.limits(), backend=opts.backend)
    entry.update(status=sol.status, objective=sol.objective, time=time.perf_counter() - start)
    ok = sol.status in ("optimal", "time_limit") and sol.assignment and \
        sol.objective <= _zero_threshold(grids)
    pset = extract_paraboloids(sol.assignment, K, dom.n) if sol.assignment else None
    return bool(ok), pset, entry


def _side_setup(func: FuncDef, side: str) -> FuncDef:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    return func if side == "below" else negated_function(func)


def _finish(report: FitReport, pset: Optional[ParaboloidSet], func: FuncDef, dom, eps, side,
            opts: SearchOptions, start: float) -> FitReport:
    if pset is not None:
        out = pset if side == "below" else flip_side(pset)
        check = verify.check_conditions(out, func, dom, eps, side, opts.cert_tol)
        report.coefficients = out.to_list()
        report.K = len(out)
        report.check = check.to_dict()
        report.status = "certified" if check.passed else "failed"
        if not check.passed:
            report.notes.append("returned set failed certification")
    elif report.status == "running":
        report.status = "failed"
    report.wall_time = time.perf_counter() - start
    return report


def binary_search_K(func: FuncDef, dom, epsilon: float, side: str = "below",
                    options: Optional[SearchOptions] = None) -> FitReport:
    """Smallest ``K`` for which the exact model reaches objective zero.

    ``K`` doubles from 1 until a solve succeeds, then bisection closes the
    interval between the last failure and the first success.
    """
    opts = options or SearchOptions()
    start = time.perf_counter()
    dom = as_box(dom)
    g = _side_setup(func, side)
    params, grids, k_bar = derive_params(g, dom, epsilon, "below", "exact",
                                         opts.delta_frac, opts.nu_frac, opts.kappa)
    params.side = side
    report = FitReport(func.id, dom.to_list(), epsilon, side, "exact",
                       params=params.to_dict(), grids=grids.to_dict())
    report.params["K_bar"] = k_bar
    found: dict[int, ParaboloidSet] = {}
    limited = False

    def attempt(K):
        nonlocal limited
        ok, pset, entry = _solve_fit(g, dom, K, params, grids, opts, False)
        report.iterations.append(entry)
        log.info("exact K=%d status=%s objective=%s", K, entry["status"], entry.get("objective"))
        if entry["status"] in ("time_limit", "size_limit") and not ok:
            limited = True
        if ok:
            found[K] = pset
        return ok

    K, lo = 1, 1
    while not attempt(K):
        lo = K + 1
        if K >= k_bar:
            report.status = "limit" if limited else "failed"
            return _finish(report, None, func, dom, epsilon, side, opts, start)
        K = min(2 * K, k_bar)
    hi = K
    while lo < hi:
        mid = (lo + hi) // 2
        if attempt(mid):
            hi = mid
        else:
            lo = mid + 1
    if limited:
        report.notes.append("some solves hit a limit; K is minimal among proven cases only")
    return _finish(report, found[hi], func, dom, epsilon, side, opts, start)


def practical_search_K(func: FuncDef, dom, epsilon: float, side: str = "below",
                       options: Optional[SearchOptions] = None) -> FitReport:
    """Adaptive search on the relaxed model with certified repair.

    Each round solves the model without the neighbor slope constraints on
    grids of ``T`` / ``D`` cells.  An unsuccessful solve increments ``K``.
    Otherwise every member is shifted down by its certified excess over
    ``f`` (so it is one-sided by construction) and the coverage condition
    is certified; failing that, one grid is refined by the growth factor.

    ``options.refine`` picks which grid grows:

    ``diagnose`` (default)
        refine the coverage grid when the unshifted set already misses
        coverage, else refine the integral grid, whose coarseness is what
        made the shifts necessary.
    ``printed``
        grow the coverage grid when a member exceeded ``f`` and the integral
        grid when coverage failed.
    ``swapped``
        the reverse pairing.
    """
    opts = options or SearchOptions()
    if opts.refine not in ("diagnose", "printed", "swapped"):
        raise ValueError(f"unknown refine rule {opts.refine!r}")
    start = time.perf_counter()
    dom = as_box(dom)
    g = _side_setup(func, side)
    params, grids, k_bar = derive_params(g, dom, epsilon, "below", "practical",
                                         opts.delta_frac, opts.nu_frac, opts.kappa)
    params.side = side
    state = SearchState(K=1, K_bar=k_bar, T=grids.t_counts, D=grids.d_counts,
                        T0=grids.t_counts, D0=grids.d_counts)
    report = FitReport(func.id, dom.to_list(), epsilon, side, "practical",
                       params=params.to_dict(), grids=grids.to_dict())
    report.params["K_bar"] = k_bar
    L_f = lipschitz_bound(g, dom)
    tol = opts.cert_tol
    result = None
    limited = False
    for _ in range(opts.iteration_limit):
        if state.K > k_bar:
            break
        solve_opts = opts
        if opts.time_budget is not None:
            left = opts.time_budget - (time.perf_counter() - start)
            if left <= 0:
                limited = True
                report.notes.append("time budget exhausted")
                break
            solve_opts = dataclasses.replace(opts, solve_time=min(opts.solve_time, left))
        params, grids, _ = derive_params(g, dom, epsilon, "below", "practical",
                                         opts.delta_frac, opts.nu_frac, opts.kappa,
                                         counts=(state.T, state.D))
        ok, pset, entry = _solve_fit(g, dom, state.K, params, grids, solve_opts, True)
        report.iterations.append(entry)
        if not ok:
            limited = limited or entry["status"] in ("time_limit", "size_limit")
            log.info("practical K=%d T=%s D=%s: %s", state.K, state.T, state.D, entry["status"])
            if entry["status"] == "size_limit":
                break                    # a larger K only adds binaries
            state.K += 1
            continue
        # excess of each member over f, certified
        checks = [verify.certify_max(lambda x, p=p: p(x) - g.fn(x),
                                     verify.paraboloid_slope_bound(p, dom) + L_f, dom, tol)
                  for p in pset]
        if opts.shift_rule == "max":
            state.c_members = [c.value for c in checks]
        else:
            # literal reading: minimum of p - f, certified as -max(f - p)
            state.c_members = [-verify.certify_max(
                lambda x, p=p: g.fn(x) - p(x),
                verify.paraboloid_slope_bound(p, dom) + L_f, dom, tol).value for p in pset]
        shifted = ParaboloidSet(p.lowered(c) for p, c in zip(pset, state.c_members))
        if opts.shift_rule == "min":
            checks = [verify.certify_max(lambda x, p=p: p(x) - g.fn(x),
                                         verify.paraboloid_slope_bound(p, dom) + L_f, dom, tol)
                      for p in shifted]
        state.one_sided_ok = all(c.value <= tol for c in checks)
        lip = max(verify.paraboloid_slope_bound(p, dom) for p in shifted) + L_f
        cov = verify.certify_max(lambda x: g.fn(x) - epsilon - shifted.envelope(x), lip, dom, tol,
                                 threshold=0.0)
        state.c_joint = -cov.value
        state.coverage_ok = cov.value <= tol
        entry.update(c_members=list(state.c_members), c_joint=state.c_joint,
                     one_sided=state.one_sided_ok, coverage=state.coverage_ok)
        log.info("practical K=%d T=%s D=%s shifts=%s coverage=%.3g", state.K, state.T, state.D,
                 np.round(state.c_members, 6), state.c_joint)
        if state.coverage_ok and (state.one_sided_ok or opts.shift_rule == "max"):
            result = shifted
            break
        grow = lambda counts: tuple(math.ceil(opts.growth * k) for k in counts)
        if opts.refine == "diagnose":
            pre = verify.certify_max(lambda x: g.fn(x) - epsilon - pset.envelope(x), lip, dom, tol,
                                     threshold=0.0)
            if pre.value > tol:
                state.T = grow(state.T)
            else:
                state.D = grow(state.D)
        else:
            coverage_grid = opts.refine == "swapped"
            if not state.one_sided_ok:
                if coverage_grid:
                    state.D = grow(state.D)
                else:
                    state.T = grow(state.T)
            if not state.coverage_ok:
                if coverage_grid:
                    state.T = grow(state.T)
                else:
                    state.D = grow(state.D)
    report.grids = grids.to_dict()
    if result is None:
        report.status = "limit" if limited else "failed"
        report.notes.append(f"stopped at K={state.K} after {len(report.iterations)} solves")
    else:
        state.K_star = len(result)
    return _finish(report, result, func, dom, epsilon, side, opts, start)


def fit(func: FuncDef, dom, epsilon: float, side: str = "below", method: str = "exact",
        options: Optional[SearchOptions] = None) -> FitReport:
    if method == "exact":
        return binary_search_K(func, dom, epsilon, side, options)
    if method == "practical":
        return practical_search_K(func, dom, epsilon, side, options)
    raise ValueError(f"method must be 'exact' or 'practical', got {method!r}")
