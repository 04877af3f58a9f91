import json
import math

import numpy as np
import pytest

from paraprox.funcspace import SIN, BoxDomain
from paraprox.lookup import (LookupTable, PreconditionError, SchemaError, TableEntry,
                             cosine_from_sine, sine_periodic_extend)
from paraprox.paraboloid import Paraboloid, ParaboloidSet
from paraprox.verify import check_conditions

from conftest import SIN_WIDE, TABLE_E1

PI = math.pi


def _entry(dom=(0.0, PI), eps=1.0, certified=True, **kw):
    ps = ParaboloidSet([Paraboloid.univariate(-0.4, 1.2, -0.5)])
    return TableEntry("sin", dom, eps, "below", ps, "practical", certified, **kw)


def test_put_and_exact_get():
    t = LookupTable()
    e = _entry()
    t.put(e)
    assert t.get("sin", (0.0, PI), 1.0, "below") is e
    # keys match up to a relative 1e-9
    assert t.get("sin", (0.0, PI * (1 + 1e-12)), 1.0, "below") is e
    assert t.get("sin", (0.0, PI), 1.0, "above") is None


def test_put_replaces_same_key():
    t = LookupTable()
    t.put(_entry())
    t.put(_entry())
    assert len(t) == 1


def test_uncertified_entries_are_refused():
    t = LookupTable()
    with pytest.raises(ValueError):
        t.put(_entry(certified=False))
    t.put(_entry(certified=False), allow_uncertified=True)
    assert t.get("sin", (0.0, PI), 1.0, "below") is None
    assert t.get("sin", (0.0, PI), 1.0, "below", certified_only=False) is not None


def test_covering_lookup_prefers_smallest_box():
    t = LookupTable()
    wide = _entry((-1.0, 5.0), eps=0.5)
    narrow = _entry((0.0, 3.0), eps=0.5)
    t.put(wide)
    t.put(narrow)
    assert t.get("sin", (0.5, 2.0), 1.0, "below") is narrow
    assert t.get("sin", (-0.5, 2.0), 1.0, "below") is wide
    # a tighter accuracy than anything stored is a miss
    assert t.get("sin", (0.5, 2.0), 0.1, "below") is None
    # boxes are never glued together
    assert t.get("sin", (-2.0, 6.0), 1.0, "below") is None


def test_save_and_load_round_trip(tmp_path):
    path = tmp_path / "table.json"
    t = LookupTable(str(path))
    t.put(_entry())
    t.save()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".table-")]
    back = LookupTable(str(path))
    assert len(back) == 1
    assert back.entries[0].to_dict() == t.entries[0].to_dict()
    t.save()
    assert path.read_text() == (tmp_path / "table.json").read_text()


def test_failed_save_leaves_old_file(tmp_path, monkeypatch):
    path = tmp_path / "table.json"
    t = LookupTable(str(path))
    t.put(_entry())
    t.save()
    before = path.read_text()
    t.put(_entry((0.0, 1.0)))

    def boom(*a, **k):
        raise OSError("disk full")
    monkeypatch.setattr("paraprox.lookup.json.dump", boom)
    with pytest.raises(OSError):
        t.save()
    assert path.read_text() == before
    assert [p.name for p in tmp_path.iterdir()] == ["table.json"]


@pytest.mark.parametrize("doc, msg", [
    ({"entries": [{"func": "sin"}]}, "misses field"),
    ({"rows": []}, "entries"),
    ({"entries": [{"func": "sin", "domain": [0, 1], "eps": 0.1, "side": "left",
                   "coeffs": [[[-1], [0], 0]]}]}, "side"),
    ({"entries": [{"func": "sin", "domain": [0, 1], "eps": -0.1, "side": "below",
                   "coeffs": [[[-1], [0], 0]]}]}, "positive"),
    ({"entries": [{"func": "sin", "domain": [0, 1], "eps": 0.1, "side": "below",
                   "coeffs": [[[1], [0], 0]], "nonpos_quad": True}]}, "nonpos_quad"),
])
def test_schema_errors(tmp_path, doc, msg):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match=msg):
        LookupTable(str(path))


def test_fixture_table_entries_recheck():
    t = LookupTable(str(TABLE_E1))
    assert t.functions() == ["exp", "sin"]
    for e in t.entries:
        assert e.certified and e.recheck().passed


def test_sine_extension_covers_three_periods():
    base = LookupTable(str(TABLE_E1)).get("sin", SIN_WIDE, 0.1, "below")
    target = (SIN_WIDE[0] - 2 * PI, SIN_WIDE[1] + 2 * PI)
    ext = sine_periodic_extend(base, target)
    assert len(ext) == 3 * len(base.paraboloids)
    rep = check_conditions(ext, SIN, target, 0.1, "below")
    assert rep.passed, rep


def test_sine_extension_preconditions():
    with pytest.raises(PreconditionError, match="full period"):
        sine_periodic_extend(_entry(), (0.0, 10.0))
    pos = TableEntry("sin", SIN_WIDE, 1.0, "below",
                     ParaboloidSet([Paraboloid.univariate(0.1, 0.0, -1.5)]), certified=True)
    with pytest.raises(PreconditionError, match="non-positive"):
        sine_periodic_extend(pos, (0.0, 10.0))


def test_cosine_from_sine():
    base = LookupTable(str(TABLE_E1)).get("sin", SIN_WIDE, 0.1, "below")
    cos_entry = cosine_from_sine(base)
    assert cos_entry.func == "cos" and not cos_entry.certified
    assert cos_entry.domain.lower[0] == pytest.approx(-PI)
    xs = np.linspace(-PI, PI, 4001)
    env = cos_entry.paraboloids.envelope(xs)
    assert np.all(env <= np.cos(xs) + 1e-9)
    assert np.all(env >= np.cos(xs) - 0.1 - 1e-9)
    assert cos_entry.recheck().passed


def test_domain_type_is_normalized():
    e = _entry(BoxDomain.interval(0.0, 1.0))
    assert e.to_dict()["domain"] == [0.0, 1.0]
