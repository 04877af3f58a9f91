import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from paraprox.funcspace import CUBE, EXP, SIN, ZIGZAG, lipschitz_bound
from paraprox.lookup import TableEntry
from paraprox.paraboloid import Paraboloid, ParaboloidSet
from paraprox.verify import (certify_max, check_conditions, dense_max, lemma_bounds,
                             paraboloid_slope_bound)

from conftest import FIXTURES, SIN_WIDE


def test_slope_bound_formula():
    p = Paraboloid.univariate(-0.5, 1.0, 0.0)
    # |2a x + b| at x = -1 and x = 3: 2 and 2
    assert paraboloid_slope_bound(p, (-1, 3)) == pytest.approx(2.0)
    q = Paraboloid((1.0, 0.0), (0.0, -4.0), 0.0)
    assert paraboloid_slope_bound(q, ([0, 0], [1, 1])) == pytest.approx(4.0)


def test_certify_sin_max():
    res = certify_max(np.sin, 1.0, (0, math.pi), 1e-8)
    assert res.certified
    assert res.incumbent <= 1.0 <= res.value
    assert res.value - 1.0 <= 1e-8
    assert res.point == pytest.approx(math.pi / 2, abs=1e-3)


def test_certify_threshold_decides_early():
    res = certify_max(np.sin, 1.0, (0, math.pi), 1e-9, threshold=2.0)
    assert res.value <= 2.0
    full = certify_max(np.sin, 1.0, (0, math.pi), 1e-9)
    assert res.evaluations < full.evaluations


def test_certify_reports_budget():
    res = certify_max(lambda x: np.sin(50 * x), 50.0, (0, 10), 1e-12, max_evals=200)
    assert not res.certified and res.value >= 1.0


def test_certify_two_dimensional_grid():
    g = lambda x: -(x[:, 0] - 0.3) ** 2 - (x[:, 1] + 0.2) ** 2
    res = certify_max(g, 4.0, ([-1, -1], [1, 1]), 1e-2)
    assert res.certified
    assert res.value >= 0.0 >= res.value - 1e-2
    tight = certify_max(g, 4.0, ([-1, -1], [1, 1]), 1e-4)
    assert not tight.certified and "capped" in tight.reason and tight.value >= 0.0


def test_certify_rejects_bad_inputs():
    with pytest.raises(ValueError):
        certify_max(np.sin, 1.0, (0, 1), 0.0)
    with pytest.raises(ValueError):
        certify_max(np.sin, math.inf, (0, 1))


@pytest.mark.parametrize("name, eps, K", [("sin_below_e0", 1.0, 1), ("sin_below_e1", 0.1, 3),
                                          ("sin_below_e2", 0.01, 13)])
def test_printed_sets_pass_at_rounding_tolerance(name, eps, K):
    doc = json.loads((FIXTURES / f"{name}.json").read_text())
    entry = TableEntry.from_dict(doc)
    assert len(entry.paraboloids) == K
    rep = check_conditions(entry.paraboloids, SIN, SIN_WIDE, eps, "below", 5e-3)
    assert rep.passed, rep.to_dict()


def test_perturbed_printed_set_fails():
    doc = json.loads((FIXTURES / "sin_below_e1.json").read_text())
    pset = ParaboloidSet.from_list(doc["coeffs"])
    raised = ParaboloidSet(p.lowered(-0.05) for p in pset)   # lifted above sin
    assert not check_conditions(raised, SIN, SIN_WIDE, 0.1, "below", 5e-3).passed
    lowered = ParaboloidSet(p.lowered(0.2) for p in pset)    # tube exceeded
    rep = check_conditions(lowered, SIN, SIN_WIDE, 0.1, "below", 5e-3)
    assert not rep.passed and rep["C1"].value > 0


def test_above_side_flips():
    # a constant at 1 is above sin on [0, pi] and within 1 of it
    pset = ParaboloidSet([Paraboloid.univariate(0.0, 0.0, 1.0)])
    assert check_conditions(pset, SIN, (0, math.pi), 1.0 + 1e-3, "above").passed
    assert not check_conditions(pset, SIN, (0, math.pi), 0.5, "above").passed


def test_dense_max_matches_closed_form():
    val, x = dense_max(np.sin, (0, math.pi), 100_001)
    assert val == pytest.approx(1.0, abs=1e-9) and x == pytest.approx(math.pi / 2, abs=1e-4)


# --- certify_max against a dense grid ---------------------------------------

FUNCS = [(SIN, (-math.pi / 2, 3 * math.pi / 2)), (EXP, (-2.0, 2.0)), (CUBE, (-1.0, 1.5)),
         (ZIGZAG, (-5.0, 5.0))]


@given(st.integers(0, len(FUNCS) - 1), st.floats(-2, 2), st.floats(-3, 3), st.floats(-2, 2))
def test_certify_upper_bounds_dense_grid(k, a, b, c):
    func, dom = FUNCS[k]
    p = Paraboloid.univariate(a, b, c)
    g = lambda x: p(x) - func.fn(x)
    lip = paraboloid_slope_bound(p, dom) + lipschitz_bound(func, dom)
    res = certify_max(g, lip, dom, 1e-6)
    ref, _ = dense_max(g, dom, 20_001)
    assert res.value >= ref - 1e-12
    assert res.incumbent <= res.value


# --- lemma validators ----------------------------------------------------------

def test_lemma_bound_values():
    assert lemma_bounds("lower", 2.0, (0, 3)) == pytest.approx(-3.0)
    assert lemma_bounds("upper", 1.0, (0, 2)) == pytest.approx(math.sqrt(3) - 1)
    assert lemma_bounds("lower", 1.0, ([0, 0], [1, 2])) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        lemma_bounds("middle", 1.0, (0, 1))


def test_lemma_lower_is_attained_by_a_v_shape():
    # g(x) = L |x - W/2| - L W / 2 is 0 at both ends with minimum -L W / 2
    L, W = 1.7, 2.5
    assert lemma_bounds("lower", L, (0, W)) == pytest.approx(-L * W / 2)
