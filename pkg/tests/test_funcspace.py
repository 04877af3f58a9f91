import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from paraprox.funcspace import (COS, CUBE, EXP, LN, SIN, SQRT, ZIGZAG, ZIGZAG_TABLE, BoxDomain,
                                DomainError, as_box, dump_function_table, eval_func, get_function,
                                integral_measure, lipschitz_bound, load_function_table,
                                separable_sum, zigzag_generate)


def test_box_basics():
    box = BoxDomain([0.0, -1.0], [2.0, 1.0])
    assert box.n == 2
    assert box.volume == pytest.approx(4.0)
    assert len(box.vertices()) == 4
    assert box.contains([1.0, 0.0]) and not box.contains([3.0, 0.0])
    assert as_box((0, 1)).to_list() == [0.0, 1.0]


def test_box_rejects_empty():
    with pytest.raises(ValueError, match="full dimensional"):
        BoxDomain([1.0], [0.0])


@pytest.mark.parametrize("func, dom, expected", [
    (SIN, (0.0, math.pi), 1.0),
    (EXP, (-5.0, -2.0), math.exp(-2.0)),
    (EXP, (-2.0, 2.0), math.exp(2.0)),
    (LN, (0.5, 4.0), 2.0),
    (SQRT, (1.0, 4.0), 0.5),
    (CUBE, (-1.0, 2.0), 12.0),
])
def test_lipschitz_values(func, dom, expected):
    assert lipschitz_bound(func, dom) == pytest.approx(expected)


def test_zigzag_lipschitz_is_max_slope():
    slopes = np.abs(np.diff(ZIGZAG_TABLE.values) / np.diff(ZIGZAG_TABLE.breakpoints))
    assert lipschitz_bound(ZIGZAG, (-5, 5)) == pytest.approx(slopes.max())
    assert slopes.max() <= 1.0


@pytest.mark.parametrize("func, dom", [(SIN, (0, math.pi)), (EXP, (-2, 2)), (COS, (0, 1)),
                                       (LN, (0.5, 3)), (SQRT, (0.25, 4)), (CUBE, (-2, 1.5)),
                                       (ZIGZAG, (-5, 5)), (ZIGZAG, (-1.3, 2.2))])
def test_measure_matches_quadrature(func, dom):
    exact = integral_measure(func, dom)
    ref, _ = quad(lambda x: float(func.fn(x)), *dom, limit=200,
                  points=[b for b in ZIGZAG_TABLE.breakpoints if dom[0] < b < dom[1]]
                  if func is ZIGZAG else None)
    assert exact == pytest.approx(ref, abs=1e-9)


def test_sin_measure_closed_form():
    assert integral_measure(SIN, (0, math.pi)) == pytest.approx(2.0, abs=1e-15)


def test_ln_outside_admissible():
    with pytest.raises(DomainError):
        lipschitz_bound(LN, (-1.0, 1.0))
    with pytest.raises(DomainError):
        eval_func(LN, [-0.5, 1.0])
    assert eval_func(LN, math.e) == pytest.approx(1.0)


def test_registry_and_unknown():
    assert get_function("sin") is SIN
    with pytest.raises(KeyError):
        get_function("tanh")


def test_function_table_round_trip():
    doc = dump_function_table(ZIGZAG)
    again = load_function_table(json.dumps(doc))
    xs = np.linspace(-5, 5, 1001)
    assert np.array_equal(again.fn(xs), ZIGZAG.fn(xs))


def test_function_table_rejects_bad_domain():
    doc = dump_function_table(ZIGZAG)
    doc["domain"] = [-6, 5]
    with pytest.raises(ValueError):
        load_function_table(doc)


@given(st.integers(0, 10_000))
def test_zigzag_generator_slopes(seed):
    data = zigzag_generate(seed)
    xs, ys = np.array(data.breakpoints), np.array(data.values)
    assert xs[0] == -5.0 and xs[-1] == 5.0
    assert np.all(np.diff(xs) > 0)
    assert np.all(np.abs(np.diff(ys)) <= np.diff(xs) + 1e-12)


def test_zigzag_generator_deterministic():
    assert zigzag_generate(7) == zigzag_generate(7)


def test_separable_sum_measure():
    f = separable_sum([SIN, EXP])
    box = BoxDomain([0.0, 0.0], [math.pi, 1.0])
    # ∫∫ sin x + e^y = 2 * 1 + pi * (e - 1)
    assert integral_measure(f, box) == pytest.approx(2 + math.pi * (math.e - 1))
    assert lipschitz_bound(f, box) == pytest.approx(math.e)


@given(st.floats(-3, 3), st.floats(0.01, 3))
def test_lipschitz_bound_dominates_secants(a, w):
    b = a + w
    L = lipschitz_bound(EXP, (a, b))
    xs = np.linspace(a, b, 50)
    slopes = np.abs(np.diff(np.exp(xs)) / np.diff(xs))
    assert slopes.max() <= L * (1 + 1e-12)
