"""Symmetric generator-weight step distributions.

A Kernel assigns a nonnegative rational weight to each generator plus an
optional holding probability; weights of a generator and its inverse must
agree (the step matrix is symmetric) and everything sums to one exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .groups import GroupSpec, uniform_weights


@dataclass(frozen=True)
class Kernel:
    group: GroupSpec
    weights: dict[str, Fraction]
    hold: Fraction = Fraction(0)
    _float_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = {g: Fraction(self.weights.get(g, 0)) for g in self.group.generators}
        total = Fraction(self.hold)
        for g, v in w.items():
            if v < 0:
                raise ValueError(f"negative weight for generator {g}")
            total += v
        if total != 1:
            raise ValueError(f"weights plus hold must sum to 1, got {total}")
        if self.hold < 0:
            raise ValueError("hold must be >= 0")
        for g, v in w.items():
            gi = self.group.inverse_generator(g)
            if v != w[gi]:
                raise ValueError(f"asymmetric weights: {g}={v} vs {gi}={w[gi]}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "hold", Fraction(self.hold))
        object.__setattr__(
            self,
            "_float_weights",
            np.array([float(w[g]) for g in self.group.generators]),
        )

    @classmethod
    def uniform(cls, group: GroupSpec, hold: Fraction | int = 0) -> "Kernel":
        """Simple random walk kernel, optionally lazy."""
        hold = Fraction(hold)
        scale = 1 - hold
        w = {g: v * scale for g, v in uniform_weights(group).items()}
        return cls(group=group, weights=w, hold=hold)

    @classmethod
    def from_json(cls, group: GroupSpec, spec: dict) -> "Kernel":
        """Build from {"weights": {gen: "p/q", ...}, "hold": "p/q"}."""
        weights = {g: Fraction(v) for g, v in spec.get("weights", {}).items()}
        hold = Fraction(spec.get("hold", 0))
        if not weights:
            return cls.uniform(group, hold)
        return cls(group=group, weights=weights, hold=hold)

    def float_weight(self, gen: str) -> float:
        return float(self.weights[gen])

    def float_weights(self) -> np.ndarray:
        """Weights in the group's generator order."""
        return self._float_weights

    def edge_probability(self, x_idx: int, y_idx: int, ball) -> Fraction:
        """Exact one-step probability P(x, y) summed over parallel edges."""
        total = Fraction(0)
        if x_idx == y_idx:
            total += self.hold
        row = ball.adjacency[x_idx]
        for j, g in enumerate(self.group.generators):
            if row[j] == y_idx:
                total += self.weights[g]
        return total

    def to_json(self) -> dict:
        return {
            "weights": {g: str(v) for g, v in self.weights.items()},
            "hold": str(self.hold),
        }
