import json
import math
import subprocess
import sys

import pytest

from paraprox.cli import ConfigError, main, parse_domain, parse_number

from conftest import FIXTURES, INSTANCES, TABLE_E1


def test_parse_number():
    assert parse_number("3pi/2") == pytest.approx(3 * math.pi / 2)
    assert parse_number("-pi/2") == pytest.approx(-math.pi / 2)
    assert parse_number(" -0.5") == -0.5
    assert parse_number("2*pi") == pytest.approx(2 * math.pi)
    with pytest.raises(ConfigError):
        parse_number("__import__('os')")
    assert parse_domain(["-pi/2", "3pi/2"]) == pytest.approx((-math.pi / 2, 3 * math.pi / 2))


def test_fit_writes_report_and_entry(tmp_path, capsys):
    table = tmp_path / "t.json"
    out = tmp_path / "fit.json"
    code = main(["fit", "--func", "sin", "--domain", "0", "pi", "--eps", "1", "--side", "below",
                 "--method", "practical", "--table", str(table), "--out", str(out)])
    assert code == 0
    assert "certified K=1" in capsys.readouterr().out
    rep = json.loads(out.read_text())
    assert rep["K"] == 1 and rep["status"] == "certified"
    assert (tmp_path / "fit.json.meta.json").exists()
    doc = json.loads(table.read_text())
    assert len(doc["entries"]) == 1 and doc["entries"][0]["certified"]


def test_fit_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["fit", "--domain", "0", "pi", "--eps", "1", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_fixtures_pass(capsys):
    files = [str(FIXTURES / f"sin_below_e{i}.json") for i in range(3)]
    assert main(["verify", "--coeffs", *files]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and all(": pass (" in l for l in lines)


def test_verify_table_and_env(capsys, monkeypatch):
    monkeypatch.setenv("PARAPROX_TABLE", str(TABLE_E1))
    assert main(["verify"]) == 0
    assert capsys.readouterr().out.count("pass") == 4


def test_verify_failure_exits_3(tmp_path):
    d = json.loads((FIXTURES / "sin_below_e0.json").read_text())
    d["coeffs"][0][2] += 0.05        # lift the paraboloid above sine
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert main(["verify", "--coeffs", str(bad)]) == 3


def test_size_limit_exits_4(tmp_path):
    code = main(["fit", "--domain", "0", "pi", "--eps", "0.01", "--max-binaries", "5",
                 "--out", str(tmp_path / "x.json")])
    assert code == 4


@pytest.mark.parametrize("argv", [
    ["fit", "--domain", "0"],
    ["fit", "--func", "tan"],
    ["fit", "--side", "left"],
    ["fit", "--domain", "1", "0"],
    ["verify", "--coeffs", "/nonexistent.json"],
    ["table", "--func", "sin"],
    ["report"],
    ["nosuchcommand"],
])
def test_configuration_errors_exit_2(argv, monkeypatch):
    monkeypatch.delenv("PARAPROX_TABLE", raising=False)
    assert main(argv) == 2


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"domain": ["0", "pi"], "eps": 5.0, "side": "above"}))
    out = tmp_path / "o.json"
    assert main(["fit", "--config", str(cfg), "--eps", "1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["epsilon"] == 1.0 and rep["side"] == "above"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["fit", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"jobs": []}))
    assert main(["fit", "--config", str(cfg)]) == 2


def test_table_command_with_workers(tmp_path, capsys):
    table = tmp_path / "t.json"
    code = main(["table", "--func", "sin", "--domain", "0", "pi", "--eps", "1", "--side", "both",
                 "--table", str(table), "--workers", "2", "--report-dir", str(tmp_path)])
    assert code == 0
    doc = json.loads(table.read_text())
    assert sorted(e["side"] for e in doc["entries"]) == ["above", "below"]
    assert (tmp_path / "fit_sin_below_eps1_practical.json").exists()


def test_relax_and_report(tmp_path, capsys):
    out = tmp_path / "relax"
    code = main(["relax", "--instance", *map(str, INSTANCES), "--table", str(TABLE_E1),
                 "--eps", "0.1", "--periodic", "--out", str(out), "--oracle-grid", "51"])
    assert code == 0
    assert (out / "sin_cap_para.lp").exists() and (out / "sin_cap_plan.json").exists()
    rows = (out / "gaps.csv").read_text().splitlines()
    assert rows[0] == "instance,variant,time,absgap,relgap"
    assert len(rows) == 1 + 3 * len(INSTANCES)

    times = tmp_path / "times.csv"
    times.write_text("instance,variant,time,absgap,relgap\na,para,10,,\nb,para,1000,,\n")
    capsys.readouterr()
    assert main(["report", "--times", str(times)]) == 0
    assert capsys.readouterr().out.strip() == "para sgm 132.13"


def test_report_from_result_files(tmp_path, capsys):
    (tmp_path / "p1__orig.txt").write_text("status optimal\nobjective 2\ntime 5\n")
    (tmp_path / "p1__para.txt").write_text("status optimal\nobjective 1.9\ndual 1\ntime 3\n")
    out = tmp_path / "gaps.csv"
    files = sorted(str(p) for p in tmp_path.glob("*.txt"))
    assert main(["report", "--results", *files, "--out", str(out)]) == 0
    text = out.read_text().splitlines()
    name, variant, t, absgap, relgap = text[2].split(",")
    assert (name, variant, float(t), float(absgap)) == ("p1", "para", 3.0, 1.0)
    assert float(relgap) == pytest.approx(0.5)


def test_census(tmp_path, capsys):
    assert main(["census", "--instance", *map(str, INSTANCES)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "function,count" and "sin,4" in lines and "exp,2" in lines


def test_zigzag_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["zigzag-gen", "--seed", "7", "--range", "-5", "5", "--out", str(a)]) == 0
    assert main(["zigzag-gen", "--seed", "7", "--range", "-5", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    main(["zigzag-gen", "--seed", "8", "--out", str(c)])
    assert c.read_bytes() != a.read_bytes()
    # the generated table is usable as a fit target
    assert main(["fit", "--func-table", str(a), "--eps", "2", "--out",
                 str(tmp_path / "z.json")]) in (0, 3, 4)


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "paraprox.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "zigzag-gen" in r.stdout
