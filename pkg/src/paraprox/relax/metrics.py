"""Optimality gaps, shifted geometric means and function counts."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from .expr import UNARY
from .instance import MinlpInstance

RELGAP_GUARD = 1e-10


@dataclass(frozen=True)
class GapReport:
    c_star: float
    dual: float
    absgap: float
    relgap: float
    time: Optional[float] = None
    status: str = ""


def gap_metrics(c_star: float, d: float, time: Optional[float] = None,
                status: str = "") -> GapReport:
    """``absgap = |c* - d|`` and ``relgap = absgap / (|c*| + 1e-10)``."""
    if math.isinf(d) or math.isnan(d) or math.isinf(c_star):
        return GapReport(c_star, d, math.inf, math.inf, time, status)
    absgap = abs(c_star - d)
    return GapReport(c_star, d, absgap, absgap / (abs(c_star) + RELGAP_GUARD), time, status)


def sgm(times: Iterable[float], shift: float = 10.0) -> float:
    """Shifted geometric mean ``(prod (t_i + s))^(1/n) - s``, computed in log space."""
    times = list(times)
    if not times:
        raise ValueError("sgm of an empty list")
    if any(t < 0 or math.isnan(t) for t in times):
        raise ValueError("run times must be nonnegative")
    logs = sorted(math.log(t + shift) for t in times)
    return math.exp(math.fsum(logs) / len(logs)) - shift


def function_census(instances: Iterable[MinlpInstance]) -> dict:
    """Occurrences of univariate nonlinear terms; squares are not counted."""
    counts = Counter()
    for inst in instances:
        for con in inst.constraints:
            for _, node in con.body.walk():
                if node.op in UNARY:
                    counts[node.op] += 1
                elif node.op == "pow" and node.value not in (1.0, 2.0):
                    counts["pow"] += 1
    return dict(sorted(counts.items()))


def census_csv(counts: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["function", "count"])
    for k, v in sorted(counts.items()):
        w.writerow([k, v])
    return buf.getvalue()


GAP_FIELDS = ("instance", "variant", "time", "absgap", "relgap")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(x)
    return str(x)


def gap_csv(rows: Iterable[tuple]) -> str:
    """Rows of ``(instance, variant, GapReport)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAP_FIELDS)
    for name, variant, rep in rows:
        w.writerow([name, variant, _fmt(rep.time), _fmt(rep.absgap), _fmt(rep.relgap)])
    return buf.getvalue()


def read_gap_csv(text: str) -> list:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append({k: (row[k] if k in ("instance", "variant") else
                        (float(row[k]) if row[k] else None)) for k in GAP_FIELDS})
    return out


def read_result_file(text: str) -> dict:
    """External solver results as ``key value`` lines (status, objective, dual, time)."""
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition(" ")
        key, value = key.strip().rstrip(":").lower(), value.strip()
        if key not in ("status", "objective", "dual", "time"):
            raise ValueError(f"unknown result key {key!r}")
        out[key] = value if key == "status" else float(value)
    if "status" not in out:
        raise ValueError("result file lacks a status line")
    return out


def sgm_by_variant(rows: list, shift: float = 10.0) -> dict:
    groups = {}
    for row in rows:
        if row["time"] is not None:
            groups.setdefault(row["variant"], []).append(row["time"])
    return {k: sgm(v, shift) for k, v in sorted(groups.items())}
