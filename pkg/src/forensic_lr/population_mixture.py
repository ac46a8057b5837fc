"""General-population frequency as a census-weighted mixture of group frequencies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from forensic_lr.match_stats import GenotypeFrequency

PARTITION_TOLERANCE = 1e-9
CENSUS_SLACK = 1e-3


@dataclass(frozen=True)
class GroupFrequency:
    group: str
    weight: float
    frequency: float

    @property
    def product(self) -> float:
        return self.weight * self.frequency


@dataclass(frozen=True)
class GroupFrequencySet:
    groups: tuple[GroupFrequency, ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        labels = [g.group for g in self.groups]
        if len(set(labels)) != len(labels):
            raise ValueError("group labels must be unique")
        for g in self.groups:
            if not 0.0 <= g.weight <= 1.0:
                raise ValueError(f"{g.group}: weight outside [0,1]: {g.weight!r}")
            if not 0.0 < g.frequency <= 1.0:
                raise ValueError(f"{g.group}: frequency outside (0,1]: {g.frequency!r}")
        if self.total_weight > 1.0 + PARTITION_TOLERANCE:
            raise ValueError(f"weights sum to {self.total_weight!r} > 1")

    @classmethod
    def from_tuples(cls, rows: Iterable[tuple[str, float, float]]) -> "GroupFrequencySet":
        return cls(tuple(GroupFrequency(*r) for r in rows))

    @property
    def total_weight(self) -> float:
        return math.fsum(g.weight for g in self.groups)

    @property
    def covered_sum(self) -> float:
        """Sum of p_j * f_j over the groups present."""
        return math.fsum(g.product for g in self.groups)

    def is_partition(self, tol: float = PARTITION_TOLERANCE) -> bool:
        return abs(self.total_weight - 1.0) <= tol


def frequencies_from_lrs(
    lrs: Sequence[float], scale: float = 1.0
) -> list[float]:
    """Profile frequencies implied by single-match LRs (f = scale / LR)."""
    return [scale / lr for lr in lrs]


def weighted_frequency(s: GroupFrequencySet) -> GenotypeFrequency:
    """f = sum_j p_j f_j over a full partition of the population."""
    if not s.is_partition():
        raise ValueError(
            f"weights sum to {s.total_weight!r}; incomplete partition, use sensitivity_table"
        )
    return GenotypeFrequency(min(1.0, s.covered_sum), "mixture")


def frequency_bounds(s: GroupFrequencySet) -> tuple[float, float]:
    """(min f_j, max f_j); the weighted frequency always lies in between."""
    if not s.groups:
        raise ValueError("empty group set")
    if not s.is_partition():
        raise ValueError(f"weights sum to {s.total_weight!r}, not a full partition")
    if any(g.weight <= 0.0 for g in s.groups):
        raise ValueError("every group in a partition needs a positive weight")
    freqs = [g.frequency for g in s.groups]
    return min(freqs), max(freqs)


@dataclass(frozen=True)
class SensitivityRow:
    multiplier: float
    uncovered_frequency: float
    contribution: float
    covered_sum: float
    total: float


def sensitivity_table(
    covered: GroupFrequencySet,
    uncovered_weight: float,
    reference: float | GenotypeFrequency,
    multipliers: Sequence[float],
) -> list[SensitivityRow]:
    """General-population totals for hypothetical frequencies k * reference
    in the uncovered share of the population.

    ``total(k) = covered_sum + slope * k`` with ``slope = uncovered_weight * reference``,
    so rows are exactly affine in k.
    """
    reference = float(reference)
    if not 0.0 <= uncovered_weight <= 1.0:
        raise ValueError(f"uncovered weight outside [0,1]: {uncovered_weight!r}")
    if abs(covered.total_weight + uncovered_weight - 1.0) > CENSUS_SLACK:
        raise ValueError(
            f"covered ({covered.total_weight!r}) + uncovered ({uncovered_weight!r}) weights do not sum to 1"
        )
    if any(k <= 0 for k in multipliers):
        raise ValueError("multipliers must be positive")
    base = covered.covered_sum
    slope = uncovered_weight * reference
    rows = []
    for k in multipliers:
        contribution = slope * k
        rows.append(
            SensitivityRow(
                multiplier=k,
                uncovered_frequency=k * reference,
                contribution=contribution,
                covered_sum=base,
                total=base + contribution,
            )
        )
    return rows


def round_sig(x: float, digits: int = 3) -> float:
    """Round to ``digits`` significant figures (display only)."""
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{digits - 1}e}")


def format_sig(x: float, digits: int = 3) -> str:
    if math.isinf(x):
        return "infinite"
    return f"{x:.{digits - 1}e}"
