import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from paraprox.milp import (BINARY, CONTINUOUS, INTEGER, Limits, MilpModel, ModelError,
                           check_point_feasible, export_lp, parse_lp, read_solution_file, solve_lp,
                           solve_milp)


# --- LP relaxation oracle ----------------------------------------------------

@st.composite
def random_lp(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(1, 5))
    rng = np.random.default_rng(draw(st.integers(0, 2**31)))
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    x0 = rng.uniform(-2, 2, size=n)
    act = A @ x0
    lo = np.where(rng.random(m) < 0.5, act - rng.uniform(0, 3, m), -np.inf)
    hi = np.where(rng.random(m) < 0.7, act + rng.uniform(0, 3, m), np.inf)
    c = rng.integers(-4, 5, size=n).astype(float)
    return c, A, lo, hi, np.full(n, -3.0), np.full(n, 3.0)


@given(random_lp())
def test_simplex_matches_scipy(lp):
    c, A, lo, hi, lb, ub = lp
    res = solve_lp(c, A, lo, hi, lb, ub)
    A_ub = np.vstack([A[np.isfinite(hi)], -A[np.isfinite(lo)]])
    b_ub = np.concatenate([hi[np.isfinite(hi)], -lo[np.isfinite(lo)]])
    ref = linprog(c, A_ub=A_ub if len(A_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  bounds=list(zip(lb, ub)), method="highs")
    assert ref.status == 0  # feasible by construction, bounded by the box
    assert res.status == "optimal"
    assert res.objective == pytest.approx(ref.fun, abs=1e-7)
    assert np.all(A @ res.x <= hi + 1e-7) and np.all(A @ res.x >= lo - 1e-7)


def test_simplex_detects_infeasible():
    A = np.array([[1.0, 1.0]])
    res = solve_lp(np.zeros(2), A, [5.0], [np.inf], [0, 0], [1, 1])
    assert res.status == "infeasible"


def test_simplex_detects_unbounded():
    res = solve_lp(np.array([-1.0]), np.zeros((0, 1)), [], [], [0.0], [np.inf])
    assert res.status == "unbounded"


# --- random small MILPs against enumeration ---------------------------------

def _random_milp(seed):
    rng = np.random.default_rng(seed)
    m = MilpModel(f"rand{seed}")
    kinds = []
    for j in range(rng.integers(2, 5)):
        kind = [BINARY, INTEGER, CONTINUOUS][rng.integers(0, 3)]
        if kind == BINARY:
            m.add_var(f"x{j}", BINARY, 0, 1)
        elif kind == INTEGER:
            m.add_var(f"x{j}", INTEGER, -2, 2)
        else:
            m.add_var(f"x{j}", CONTINUOUS, -1.5, 2.5)
        kinds.append(kind)
    names = [v.name for v in m.variables]
    for i in range(rng.integers(1, 4)):
        coeffs = {v: float(rng.integers(-4, 5)) for v in names}
        sense = "=" if rng.random() < 0.1 else ["<=", ">="][rng.integers(0, 2)]
        m.add_constr(coeffs, sense, float(rng.integers(-3, 4)))
    m.set_objective({v: float(rng.integers(-5, 6)) for v in names})
    return m


def _enumerate(model):
    """Optimum by enumerating integer parts and solving each LP with HiGHS."""
    ints = [v for v in model.variables if v.is_integral]
    conts = [v for v in model.variables if not v.is_integral]
    best = math.inf
    for combo in itertools.product(*[range(int(v.lb), int(v.ub) + 1) for v in ints]):
        fixed = dict(zip((v.name for v in ints), combo))
        c = np.array([model.objective.get(v.name, 0.0) for v in conts])
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        for con in model.constraints:
            row = np.array([dict(con.coeffs).get(v.name, 0.0) for v in conts])
            rest = con.rhs - sum(c_ * fixed[v] for v, c_ in con.coeffs if v in fixed)
            if con.sense == "<=":
                A_ub.append(row); b_ub.append(rest)
            elif con.sense == ">=":
                A_ub.append(-row); b_ub.append(-rest)
            else:
                A_eq.append(row); b_eq.append(rest)
        const = sum(model.objective.get(k, 0.0) * x for k, x in fixed.items())
        if not conts:
            ok = all(b >= -1e-9 for b in b_ub) and all(abs(b) <= 1e-9 for b in b_eq)
            if ok:
                best = min(best, const)
            continue
        res = linprog(c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                      A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                      bounds=[(v.lb, v.ub) for v in conts], method="highs")
        if res.status == 0:
            best = min(best, res.fun + const)
    return best


@pytest.mark.parametrize("seed", range(200))
def test_branch_and_bound_matches_enumeration(seed):
    model = _random_milp(seed)
    expected = _enumerate(model)
    sol = solve_milp(model, Limits(time=30))
    if math.isinf(expected):
        assert sol.status == "infeasible"
    else:
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(expected, abs=1e-6)
        assert check_point_feasible(model, sol.assignment, 1e-6)


@pytest.mark.parametrize("seed", range(0, 200, 20))
def test_backends_agree(seed):
    model = _random_milp(seed)
    a = solve_milp(model, backend="builtin")
    b = solve_milp(model, backend="highs")
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_size_limit_rejects_before_solving():
    m = MilpModel()
    for j in range(5):
        m.add_var(f"b{j}", BINARY, 0, 1)
    sol = solve_milp(m, Limits(max_binaries=4))
    assert sol.status == "size_limit"


def test_knapsack():
    m = MilpModel("knap")
    w, v = [3, 4, 5, 6], [4, 5, 6, 7]
    for j in range(4):
        m.add_var(f"b{j}", BINARY, 0, 1)
    m.add_constr({f"b{j}": w[j] for j in range(4)}, "<=", 10)
    m.set_objective({f"b{j}": -v[j] for j in range(4)})
    sol = solve_milp(m)
    assert sol.objective == pytest.approx(-12.0)  # items 2 and 4


def test_model_errors():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("x")
    with pytest.raises(ModelError):
        m.add_constr({"y": 1.0}, "<=", 0)
    with pytest.raises(ModelError):
        m.add_constr({"x": 1.0}, "<>", 0)
    with pytest.raises(ModelError):
        m.add_var("b", BINARY, 0, 2)


def test_point_feasibility_reports_violations():
    m = MilpModel()
    m.add_var("x", CONTINUOUS, 0, 1)
    m.add_var("k", INTEGER, 0, 3)
    m.add_constr({"x": 1.0, "k": 1.0}, "<=", 2, "cap")
    rep = check_point_feasible(m, {"x": 0.5, "k": 1.0})
    assert rep.feasible and rep.slacks["cap"] == pytest.approx(0.5)
    rep = check_point_feasible(m, {"x": 1.5, "k": 1.5})
    names = {n for n, _ in rep.violations}
    assert {"cap", "bound:x", "integrality:k"} <= names


# --- LP file format ----------------------------------------------------------

def _sample_model():
    m = MilpModel("sample")
    m.add_var("x", CONTINUOUS, -1, 4)
    m.add_var("y", CONTINUOUS, 0, math.inf)
    m.add_var("b", BINARY, 0, 1)
    m.add_var("k", INTEGER, -3, 3)
    m.add_var("f", CONTINUOUS, 2, 2)
    m.add_constr({"x": 1.0, "y": -2.5, "b": 3.0}, "<=", 4.0, "c1")
    m.add_constr({"x": 1.0, "k": 1.0}, ">=", -1.0, "c2", squares={"x": -0.5})
    m.add_constr({}, "<=", 1.0, "empty")
    m.add_constr({"y": 1.0, "f": 1.0}, "=", 3.0, "eq")
    m.set_objective({"x": 1.0, "b": -2.0, "k": 0.25}, 1.5)
    return m


def _same(a, b):
    # the file format does not record declaration order
    assert sorted((v.name, v.kind, v.lb, v.ub) for v in a.variables) == \
           sorted((v.name, v.kind, v.lb, v.ub) for v in b.variables)
    for ca, cb in zip(a.constraints, b.constraints):
        assert ca.name == cb.name and ca.sense == cb.sense
        assert ca.rhs == pytest.approx(cb.rhs)
        assert dict(ca.coeffs) == pytest.approx(dict(cb.coeffs))
        assert dict(ca.squares) == pytest.approx(dict(cb.squares))
    assert a.objective == pytest.approx(b.objective)
    assert a.objective_constant == pytest.approx(b.objective_constant)


def test_lp_round_trip():
    m = _sample_model()
    text = export_lp(m)
    assert "Binaries" in text and "Generals" in text and "[ - 0.5 x ^ 2 ]" in text
    _same(m, parse_lp(text))
    once = export_lp(parse_lp(text))
    assert export_lp(parse_lp(once)) == once


@given(st.integers(0, 10_000))
def test_lp_round_trip_random(seed):
    m = _random_milp(seed)
    _same(m, parse_lp(export_lp(m)))


def test_lp_rejects_bad_names():
    m = MilpModel()
    m.add_var("1bad")
    with pytest.raises(ValueError):
        export_lp(m)


def test_read_solution_file():
    text = "# from an external solver\nstatus optimal\nobjective -3.5\nx 1\ny 2.5\n"
    sol = read_solution_file(text)
    assert sol.status == "optimal" and sol.objective == -3.5 and sol["y"] == 2.5
    with pytest.raises(ValueError):
        read_solution_file("objective 1\n")
