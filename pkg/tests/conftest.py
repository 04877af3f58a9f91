import math
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
INSTANCES = sorted((FIXTURES / "instances").glob("*.json"))
TABLE_E1 = FIXTURES / "table_e1.json"
SIN_WIDE = (-math.pi / 2, 3 * math.pi / 2)

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# acceptance results are collected here and echoed once at the end of the run
_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    results = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        results[number] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_CRITERIA, {})
    if results:
        terminalreporter.section("acceptance")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
