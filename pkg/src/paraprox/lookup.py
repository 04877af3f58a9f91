"""Persistent table of certified approximations.

An approximation valid on a box is valid on every sub-box, and one with
accuracy ``eps'`` also satisfies any request with ``eps >= eps'``.  Lookups
use both facts but never glue entries of different boxes together: the
envelope of two locally valid sets need not be one-sided across the seam.

The file is a single JSON document::

    {"entries": [{"func": "sin", "domain": [a, b], "eps": 0.1,
                  "side": "below", "coeffs": [[[al], [be], ga], ...],
                  "certified": true, "nonpos_quad": true,
                  "method": "practical", "meta": {...}}]}

Writes go to a temporary file in the same directory followed by an atomic
rename; a lock serializes writers within the process.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
from dataclasses import dataclass, field
from typing import Optional

from . import verify
from .funcspace import BoxDomain, as_box, get_function
from .paraboloid import ParaboloidSet

METHODS = ("exact", "practical", "constructive", "external")
KEY_RTOL = 1e-9
TWO_PI = 2.0 * math.pi
SINE_PERIOD_BASE = (-math.pi / 2, 3 * math.pi / 2)


class SchemaError(ValueError):
    """An entry or table document does not follow the storage schema."""


class PreconditionError(ValueError):
    pass


def _close(x: float, y: float) -> bool:
    return abs(x - y) <= KEY_RTOL * max(1.0, abs(x), abs(y))


@dataclass
class TableEntry:
    func: str
    domain: BoxDomain
    eps: float
    side: str
    paraboloids: ParaboloidSet
    method: str = "external"
    certified: bool = False
    nonpos_quad: Optional[bool] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domain = as_box(self.domain)
        self.paraboloids = ParaboloidSet(self.paraboloids)
        if self.side not in ("below", "above"):
            raise SchemaError(f"side must be 'below' or 'above', got {self.side!r}")
        if self.method not in METHODS:
            raise SchemaError(f"method must be one of {METHODS}, got {self.method!r}")
        try:
            self.eps = float(self.eps)
        except (TypeError, ValueError):
            raise SchemaError(f"eps must be a number, got {self.eps!r}") from None
        if not self.eps > 0:
            raise SchemaError(f"eps must be positive, got {self.eps!r}")
        if not self.paraboloids:
            raise SchemaError("entry has no paraboloids")
        if self.paraboloids.n != self.domain.n:
            raise SchemaError("coefficient dimension does not match the domain")
        all_nonpos = all(a <= 0 for p in self.paraboloids for a in p.alpha)
        if self.nonpos_quad is None:
            self.nonpos_quad = all_nonpos
        elif self.nonpos_quad and not all_nonpos:
            raise SchemaError("entry flagged nonpos_quad has a positive quadratic coefficient")

    @property
    def key(self) -> tuple:
        return (self.func, tuple(self.domain.lower), tuple(self.domain.upper), self.eps, self.side)

    def matches_key(self, func: str, dom: BoxDomain, eps: float, side: str) -> bool:
        return (self.func == func and self.side == side and _close(self.eps, eps)
                and self.domain.n == dom.n
                and all(_close(x, y) for x, y in zip(self.domain.lower, dom.lower))
                and all(_close(x, y) for x, y in zip(self.domain.upper, dom.upper)))

    def covers(self, dom: BoxDomain) -> bool:
        tol = [KEY_RTOL * max(1.0, abs(v)) for v in dom.lower]
        return (self.domain.n == dom.n
                and all(lo <= x + t for lo, x, t in zip(self.domain.lower, dom.lower, tol))
                and all(hi >= x - KEY_RTOL * max(1.0, abs(x)) for hi, x in zip(self.domain.upper, dom.upper)))

    def recheck(self, tol: float = verify.DEFAULT_TOL, dom=None) -> verify.ConditionReport:
        return verify.check_conditions(self.paraboloids, get_function(self.func),
                                       dom or self.domain, self.eps, self.side, tol)

    def to_dict(self) -> dict:
        domain = self.domain.to_list()
        coeffs = [p.to_list() for p in self.paraboloids]
        return {"func": self.func, "domain": domain, "eps": self.eps, "side": self.side,
                "coeffs": coeffs, "certified": self.certified, "nonpos_quad": self.nonpos_quad,
                "method": self.method, "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "TableEntry":
        try:
            func, domain, eps, side, coeffs = d["func"], d["domain"], d["eps"], d["side"], d["coeffs"]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"entry misses field {exc}") from None
        if not isinstance(domain, list) or len(domain) != 2:
            raise SchemaError(f"domain must be [a, b], got {domain!r}")
        try:
            dom = as_box(tuple(domain))
            pset = ParaboloidSet.from_list(coeffs)
        except (ValueError, TypeError) as exc:
            raise SchemaError(str(exc)) from None
        return cls(func, dom, float(eps), side, pset, d.get("method", "external"),
                   bool(d.get("certified", False)), d.get("nonpos_quad"), dict(d.get("meta", {})))


class LookupTable:
    """In-memory index over a JSON table file."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.entries: list[TableEntry] = []
        self._lock = threading.Lock()
        if path and os.path.exists(path):
            self.load(path)

    def __len__(self) -> int:
        return len(self.entries)

    def load(self, path: str) -> None:
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
            raise SchemaError("table document needs an 'entries' array")
        self.entries = [TableEntry.from_dict(e) for e in doc["entries"]]

    def save(self, path: Optional[str] = None) -> None:
        path = path or self.path
        if path is None:
            raise ValueError("no path to save the table to")
        with self._lock:
            doc = {"entries": [e.to_dict() for e in self.entries]}
            directory = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(prefix=".table-", dir=directory)
            try:
                with os.fdopen(fd, "w") as fh:
                    json.dump(doc, fh, indent=1, sort_keys=True)
                    fh.write("\n")
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise

    def put(self, entry: TableEntry, allow_uncertified: bool = False) -> None:
        if not entry.certified and not allow_uncertified:
            raise ValueError("refusing to store an uncertified entry without allow_uncertified")
        with self._lock:
            self.entries = [e for e in self.entries
                            if not e.matches_key(entry.func, entry.domain, entry.eps, entry.side)]
            self.entries.append(entry)

    def get(self, func: str, dom, eps: float, side: str,
            certified_only: bool = True) -> Optional[TableEntry]:
        """Exact key, else the smallest stored box containing ``dom`` with ``eps' <= eps``."""
        dom = as_box(dom)
        pool = [e for e in self.entries if e.certified or not certified_only]
        for e in pool:
            if e.matches_key(func, dom, eps, side):
                return e
        candidates = [e for e in pool if e.func == func and e.side == side
                      and e.eps <= eps * (1 + KEY_RTOL) and e.covers(dom)]
        if not candidates:
            return None
        # smallest box first, then the looser eps (fewer paraboloids usually), then order
        return min(candidates, key=lambda e: (e.domain.volume, -e.eps, len(e.paraboloids)))

    def functions(self) -> list:
        return sorted({e.func for e in self.entries})


def sine_periodic_extend(base: TableEntry, target) -> ParaboloidSet:
    """Copies of a sine approximation shifted by whole periods to cover ``target``.

    Paraboloids with non-positive curvature keep decreasing away from the
    base period, so they stay below sine on the neighboring periods where the
    shifted copies take over.
    """
    target = as_box(target)
    if base.func != "sin" or base.domain.n != 1:
        raise PreconditionError("periodic extension needs a one-dimensional sine entry")
    if not base.nonpos_quad:
        raise PreconditionError("periodic extension needs non-positive quadratic coefficients")
    if base.side == "above":
        raise PreconditionError("periodic extension is defined for below-approximations; "
                                "build the above side from the negated function")
    lo, hi = base.domain.lower[0], base.domain.upper[0]
    if not (_close(hi - lo, TWO_PI) or hi - lo > TWO_PI):
        raise PreconditionError("base entry must span a full period")
    a, b = target.lower[0], target.upper[0]
    # periods [lo + 2 pi k, hi + 2 pi k] that overlap the target in more than a point
    k_min = math.floor((a - hi) / TWO_PI + 1e-9) + 1
    k_max = math.ceil((b - lo) / TWO_PI - 1e-9) - 1
    out = []
    for k in range(k_min, max(k_min, k_max) + 1):
        out.extend(p.shifted(TWO_PI * k) for p in base.paraboloids)
    return ParaboloidSet(out)


def cosine_from_sine(base: TableEntry) -> TableEntry:
    """``cos(x) = sin(x + pi/2)``: shift the sine entry left by a quarter period."""
    if base.func != "sin" or base.domain.n != 1:
        raise PreconditionError("cosine derivation needs a one-dimensional sine entry")
    s = -math.pi / 2
    dom = BoxDomain.interval(base.domain.lower[0] + s, base.domain.upper[0] + s)
    return TableEntry("cos", dom, base.eps, base.side, base.paraboloids.shifted(s), base.method,
                      False, base.nonpos_quad, {"derived_from": "sin"})


def entry_from_report(report, method: Optional[str] = None) -> TableEntry:
    """Table entry for a finished fit report."""
    params = report.params
    return TableEntry(report.func, as_box(tuple(report.domain)), report.epsilon, report.side,
                      report.paraboloids, method or report.method, report.status == "certified",
                      None, {"K": report.K, "delta": params.get("delta"), "nu": params.get("nu"),
                             "C": params.get("C")})

