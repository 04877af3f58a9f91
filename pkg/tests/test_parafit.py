import math

import numpy as np
import pytest

from paraprox.funcspace import EXP, SIN, ZIGZAG, as_box, separable_sum
from paraprox.milp import Limits, check_point_feasible, solve_milp
from paraprox.parafit import (FitSizeError, GridSpec, SearchOptions, build_fit_model,
                              constructive_solution, derive_params, fit, flip_side,
                              paraboloid_assignment, practical_search_K)
from paraprox.paraboloid import Paraboloid, ParaboloidSet
from paraprox.verify import check_conditions

PI = math.pi


def test_exact_parameters():
    params, grids, k_bar = derive_params(SIN, (0, PI), 1.0, "below", "exact")
    assert params.delta == 0.5 and params.nu == 0.25 and params.C == 10.0
    # coverage width (eps - delta) / (3L) * (n+1)/n^2 = 1/3 on a width-pi box
    assert max(grids.dt) <= 1 / 3 + 1e-12
    assert grids.t_counts == (math.ceil(PI * 3),)
    width_d = 2 * 0.25 / ((math.sqrt(3) - 1) * 11)
    assert max(grids.dd) <= width_d + 1e-12
    assert k_bar == grids.num_eps_points


def test_practical_parameters():
    params, grids, _ = derive_params(SIN, (-PI / 2, 3 * PI / 2), 0.01, "below", "practical")
    assert params.delta == pytest.approx(0.009) and params.nu == pytest.approx(0.09)
    assert grids.t_counts == grids.d_counts == (math.ceil(2 * PI / 0.1),)


def test_theorem_parameters_report_width_bound():
    params, grids, _ = derive_params(SIN, (0, PI), 1.0, "below", "theorem")
    assert grids.t_counts == grids.d_counts
    assert params.C == pytest.approx(2 * 1.0 * grids.t_counts[0])
    assert params.diagnostics["width_bound_satisfied"] is False


def test_parameter_validation():
    with pytest.raises(ValueError):
        derive_params(SIN, (0, PI), -1.0)
    with pytest.raises(ValueError):
        derive_params(SIN, (0, PI), 1.0, delta_frac=1.2)
    with pytest.raises(ValueError):
        derive_params(SIN, (0, PI), 1.0, mode="loose")


def test_coefficient_boxes_and_big_m():
    params, grids, _ = derive_params(EXP, (-2, 2), 1.0, "below", "exact")
    assert params.alpha_max[0] == pytest.approx(params.C / 4)
    assert params.beta_max[0] == pytest.approx(params.C * (1 + 2 * 2 / 4))
    assert params.M2 == params.C
    assert params.gamma_lo < math.exp(-2) - 1.0 < params.gamma_hi


def test_grid_neighbors_are_diagonal():
    g = GridSpec(as_box(([0, 0], [1, 1])), (2, 2), (2, 2))
    # centre point (1, 1) of a 3x3 grid has the four diagonal neighbors
    assert sorted(g.neighbors(4)) == [0, 2, 6, 8]
    assert sorted(g.neighbors(0)) == [4]


def test_model_size_and_names():
    params, grids, _ = derive_params(SIN, (0, PI), 1.0, "below", "exact")
    m = build_fit_model(SIN, (0, PI), 2, params, grids)
    assert m.num_binaries == 2 * grids.num_eps_points
    names = {c.name for c in m.constraints}
    assert {"cover_l0_t0", "under_l1_d0", "integral_l0_d0", "order_l0", "select_t0",
            "slopeahi_l0_i0"} <= names
    assert any(n.startswith("nbhi_") for n in names)
    relaxed = build_fit_model(SIN, (0, PI), 2, params, grids, drop_slope_neighbors=True)
    assert not any(c.name.startswith("nb") for c in relaxed.constraints)


def test_size_cap_raises():
    params, grids, _ = derive_params(EXP, (-2, 2), 0.1, "below", "exact")
    with pytest.raises(FitSizeError):
        build_fit_model(EXP, (-2, 2), 5, params, grids, limits=Limits(max_binaries=100))


@pytest.mark.parametrize("func, dom, eps", [(SIN, (0, PI), 1.0), (EXP, (-1, 1), 0.5),
                                            (ZIGZAG, (-5, 5), 1.0)])
def test_constructive_solution_is_feasible(func, dom, eps):
    params, grids, _ = derive_params(func, dom, eps, "below", "theorem")
    pset, sel = constructive_solution(func, dom, params, grids)
    model = build_fit_model(func, dom, len(pset), params, grids,
                            limits=Limits(max_binaries=10**6, max_continuous=10**7))
    point = paraboloid_assignment(pset, func, params, grids, sel)
    rep = check_point_feasible(model, point, 1e-6)
    assert rep.feasible, rep.violations[:5]
    assert rep.objective == pytest.approx(0.0, abs=1e-9)


def test_constructive_solution_two_dimensional():
    f = separable_sum([SIN, SIN])
    dom = ([0.0, 0.0], [PI, PI])
    params, grids, _ = derive_params(f, dom, 2.0, "below", "theorem")
    pset, sel = constructive_solution(f, dom, params, grids)
    model = build_fit_model(f, dom, len(pset), params, grids,
                            limits=Limits(max_binaries=10**6, max_continuous=10**7))
    rep = check_point_feasible(model, paraboloid_assignment(pset, f, params, grids, sel), 1e-6)
    assert rep.feasible and rep.objective == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("func, dom, eps, K, counts", [
    (SIN, (0, PI), 0.3, 2, (6, 12)), (SIN, (0, PI), 0.15, 1, (3, 6)),
    (EXP, (-2, 2), 0.5, 2, (6, 12)), (EXP, (-2, 2), 1.0, 1, (4, 8)),
    (ZIGZAG, (-5, 5), 1.0, 2, (8, 16)), (SIN, (-1.5, 4.7), 0.5, 1, (4, 8)),
])
def test_backends_agree_on_fit_models(func, dom, eps, K, counts):
    params, grids, _ = derive_params(func, dom, eps, "below", "practical", counts=counts)
    model = build_fit_model(func, dom, K, params, grids, drop_slope_neighbors=True)
    a = solve_milp(model, Limits(time=60), backend="builtin")
    b = solve_milp(model, Limits(time=60), backend="highs")
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_backends_agree_on_exact_model():
    params, grids, _ = derive_params(SIN, (0, PI), 1.0, "below", "exact")
    model = build_fit_model(SIN, (0, PI), 1, params, grids)
    a = solve_milp(model, backend="builtin")
    b = solve_milp(model, backend="highs")
    assert a.status == b.status == "optimal"
    assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_flip_side_negates():
    ps = ParaboloidSet([Paraboloid.univariate(1, -2, 3)])
    assert flip_side(ps)[0] == Paraboloid.univariate(-1, 2, -3)


def test_exact_fit_sin_above_half_period():
    rep = fit(SIN, (0, PI), 1.0, "above", "exact")
    assert rep.status == "certified" and rep.K == 1
    assert check_conditions(rep.paraboloids, SIN, (0, PI), 1.0, "above").passed


def test_practical_fit_returns_one_sided_set():
    rep = practical_search_K(SIN, (0, PI), 1.0, "below")
    assert rep.status == "certified" and rep.K == 1
    xs = np.linspace(0, PI, 2001)
    assert np.all(rep.paraboloids.envelope(xs) <= np.sin(xs) + 1e-9)
    assert np.all(rep.paraboloids.envelope(xs) >= np.sin(xs) - 1.0)


def test_practical_options_checked():
    with pytest.raises(ValueError):
        practical_search_K(SIN, (0, PI), 1.0, options=SearchOptions(refine="random"))


def test_report_json_without_timing_is_stable():
    a = practical_search_K(SIN, (0, PI), 1.0)
    b = practical_search_K(SIN, (0, PI), 1.0)
    assert a.to_json(timing=False) == b.to_json(timing=False)
    assert "wall_time" not in a.to_json(timing=False)


def test_fit_rejects_unknown_method():
    with pytest.raises(ValueError):
        fit(SIN, (0, PI), 1.0, method="magic")


def test_practical_stops_at_first_size_limit():
    rep = practical_search_K(SIN, (0.0, math.pi), 0.01, "below", SearchOptions(max_binaries=5))
    assert rep.status == "limit" and len(rep.paraboloids) == 0
    assert [it["status"] for it in rep.iterations] == ["size_limit"]
