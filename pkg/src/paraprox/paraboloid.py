"""Separable paraboloids ``p(x) = sum_i a_i x_i^2 + sum_i b_i x_i + c``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Paraboloid:
    alpha: tuple
    beta: tuple
    gamma: float

    def __post_init__(self):
        alpha = tuple(float(v) for v in np.atleast_1d(self.alpha))
        beta = tuple(float(v) for v in np.atleast_1d(self.beta))
        if len(alpha) != len(beta):
            raise ValueError("alpha and beta need the same length")
        if not all(np.isfinite(alpha + beta + (float(self.gamma),))):
            raise ValueError("paraboloid coefficients must be finite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def univariate(cls, alpha: float, beta: float, gamma: float) -> "Paraboloid":
        return cls((alpha,), (beta,), gamma)

    @property
    def n(self) -> int:
        return len(self.alpha)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.alpha)
        b = np.asarray(self.beta)
        if self.n == 1 and x.ndim <= 1:
            return a[0] * x * x + b[0] * x + self.gamma
        return (x * x) @ a + x @ b + self.gamma

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.asarray(self.alpha) * x + np.asarray(self.beta)

    def integral(self, lo, hi) -> float:
        """Exact integral over the box ``[lo, hi]``."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        w = hi - lo
        vol = float(np.prod(w))
        if vol == 0.0:
            return 0.0
        total = self.gamma * vol
        for i in range(self.n):
            others = vol / w[i]
            total += others * (self.alpha[i] * (hi[i] ** 3 - lo[i] ** 3) / 3.0
                               + self.beta[i] * (hi[i] ** 2 - lo[i] ** 2) / 2.0)
        return float(total)

    def shifted(self, s) -> "Paraboloid":
        """``x -> p(x - s)``."""
        s = np.broadcast_to(np.asarray(s, dtype=float), (self.n,))
        a = np.asarray(self.alpha)
        b = np.asarray(self.beta)
        return Paraboloid(tuple(a), tuple(b - 2 * a * s), self.gamma + float(a @ (s * s) - b @ s))

    def lowered(self, c: float) -> "Paraboloid":
        return Paraboloid(self.alpha, self.beta, self.gamma - c)

    def negated(self) -> "Paraboloid":
        return Paraboloid(tuple(-v for v in self.alpha), tuple(-v for v in self.beta), -self.gamma)

    def to_list(self) -> list:
        return [list(self.alpha), list(self.beta), self.gamma]

    @classmethod
    def from_list(cls, item) -> "Paraboloid":
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise ValueError(f"expected [alpha, beta, gamma], got {item!r}")
        return cls(item[0], item[1], item[2])


class ParaboloidSet(tuple):
    """Immutable ordered collection of paraboloids of equal dimension."""

    def __new__(cls, items: Iterable[Paraboloid] = ()):
        items = tuple(items)
        if len({p.n for p in items}) > 1:
            raise ValueError("mixed dimensions in paraboloid set")
        return super().__new__(cls, items)

    @property
    def n(self) -> int:
        return self[0].n if self else 0

    def envelope(self, x):
        """Pointwise maximum of the members."""
        return np.max([p(x) for p in self], axis=0)

    def lower_envelope(self, x):
        return np.min([p(x) for p in self], axis=0)

    def flipped(self) -> "ParaboloidSet":
        return ParaboloidSet(p.negated() for p in self)

    def shifted(self, s) -> "ParaboloidSet":
        return ParaboloidSet(p.shifted(s) for p in self)

    def to_list(self) -> list:
        return [p.to_list() for p in self]

    @classmethod
    def from_list(cls, items: Sequence) -> "ParaboloidSet":
        return cls(Paraboloid.from_list(it) for it in items)

    def __repr__(self) -> str:
        return f"ParaboloidSet({list(self)!r})"
