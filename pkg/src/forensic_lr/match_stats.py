"""Genotype and profile match probabilities.

Single-locus frequencies under Hardy-Weinberg and under the Balding-Nichols
coancestry correction, the multi-locus product rule, a simplified ceiling
bound, and the full-sibling conditional match probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from forensic_lr.population_db import PopulationTable

RACE_BLIND_THETA = 0.03
DEFAULT_CEILING_FLOOR = 0.05
Z_95 = 1.96


@dataclass(frozen=True)
class Genotype:
    """Unordered allele pair at one locus, stored sorted."""

    locus: str
    alleles: tuple[str, str]

    def __init__(self, locus: str, a1: str, a2: str | None = None):
        if a2 is None:
            a1, a2 = parse_allele_pair(a1)
        if not locus:
            raise ValueError("locus must be non-empty")
        object.__setattr__(self, "locus", locus)
        object.__setattr__(self, "alleles", tuple(sorted((str(a1), str(a2)))))

    @property
    def homozygous(self) -> bool:
        return self.alleles[0] == self.alleles[1]

    def __str__(self) -> str:
        return "/".join(self.alleles)


def parse_allele_pair(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split("/")]
    if len(parts) != 2 or not all(parts):
        raise ValueError(f"genotype must look like 'a1/a2', got {text!r}")
    return parts[0], parts[1]


class MultiLocusProfile(Sequence[Genotype]):
    """Ordered genotypes, one per distinct locus."""

    def __init__(self, genotypes: Iterable[Genotype]):
        self._genotypes = tuple(genotypes)
        if not self._genotypes:
            raise ValueError("profile must contain at least one locus")
        loci = [g.locus for g in self._genotypes]
        if len(set(loci)) != len(loci):
            raise ValueError(f"duplicate loci in profile: {loci}")

    @classmethod
    def from_mapping(cls, genotypes: Mapping[str, str]) -> "MultiLocusProfile":
        """Build from ``{locus: "a1/a2"}``."""
        return cls(Genotype(locus, pair) for locus, pair in genotypes.items())

    def __getitem__(self, i):
        return self._genotypes[i]

    def __len__(self) -> int:
        return len(self._genotypes)

    def __iter__(self) -> Iterator[Genotype]:
        return iter(self._genotypes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiLocusProfile):
            return NotImplemented
        return self.by_locus() == other.by_locus()

    def __hash__(self) -> int:
        return hash(frozenset(self.by_locus().items()))

    def __repr__(self) -> str:
        body = ", ".join(f"{g.locus}={g}" for g in self)
        return f"MultiLocusProfile({body})"

    @property
    def loci(self) -> list[str]:
        return [g.locus for g in self._genotypes]

    def by_locus(self) -> dict[str, tuple[str, str]]:
        return {g.locus: g.alleles for g in self._genotypes}

    def alleles(self) -> set[tuple[str, str]]:
        """All (locus, allele) pairs carried by the profile."""
        return {(g.locus, a) for g in self._genotypes for a in g.alleles}


@dataclass(frozen=True)
class GenotypeFrequency:
    value: float
    model: str  # "HW", "theta(0.03)", "ceiling", "sib"

    def __post_init__(self):
        if not 0.0 < self.value <= 1.0:
            raise ValueError(f"frequency outside (0,1]: {self.value!r}")

    def __float__(self) -> float:
        return self.value


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"theta must lie in [0, 1), got {theta!r}")


def _allele_freqs(g: Genotype, freqs: Mapping[str, float]) -> tuple[float, float]:
    out = []
    for a in g.alleles:
        try:
            p = freqs[a]
        except KeyError:
            raise KeyError(f"allele {a!r} at {g.locus!r} has no frequency") from None
        if not p > 0.0:
            raise ValueError(f"allele {a!r} at {g.locus!r} has non-positive frequency {p!r}")
        out.append(p)
    return out[0], out[1]


def _hw(g: Genotype, p: float, q: float) -> float:
    return p * p if g.homozygous else 2.0 * p * q


def _balding_nichols(g: Genotype, p: float, q: float, theta: float) -> float:
    denom = (1.0 + theta) * (1.0 + 2.0 * theta)
    if g.homozygous:
        return (2 * theta + (1 - theta) * p) * (3 * theta + (1 - theta) * p) / denom
    return 2.0 * (theta + (1 - theta) * p) * (theta + (1 - theta) * q) / denom


def hw_genotype_freq(g: Genotype, freqs: Mapping[str, float]) -> GenotypeFrequency:
    """Hardy-Weinberg frequency: p^2 for homozygotes, 2pq for heterozygotes."""
    p, q = _allele_freqs(g, freqs)
    return GenotypeFrequency(_hw(g, p, q), "HW")


def theta_genotype_freq(
    g: Genotype, freqs: Mapping[str, float], theta: float
) -> GenotypeFrequency:
    """Balding-Nichols conditional match probability for coancestry ``theta``.

    At ``theta == 0`` this returns exactly the Hardy-Weinberg value.
    """
    _check_theta(theta)
    p, q = _allele_freqs(g, freqs)
    if theta == 0.0:
        return GenotypeFrequency(_hw(g, p, q), "HW")
    return GenotypeFrequency(_balding_nichols(g, p, q, theta), f"theta({theta:g})")


def profile_frequency(
    profile: MultiLocusProfile, table: PopulationTable, theta: float = 0.0
) -> GenotypeFrequency:
    """Product-rule frequency of ``profile`` in ``table``'s population."""
    _check_theta(theta)
    value = 1.0
    model = "HW"
    for g in profile:
        f = theta_genotype_freq(g, table.alleles(g.locus), theta)
        value *= f.value
        model = f.model
    return GenotypeFrequency(value, model)


def upper95(p: float, two_n: int | None) -> float:
    """Normal-approximation 95% upper confidence limit on an allele frequency."""
    if two_n is None:
        return p
    return min(1.0, p + Z_95 * math.sqrt(p * (1.0 - p) / two_n))


def ceiling_allele_frequency(
    locus: str, allele: str, tables: Sequence[PopulationTable], floor: float
) -> float:
    uppers = [
        upper95(t.alleles(locus)[allele], t.two_n(locus))
        for t in tables
        if allele in t.alleles(locus)
    ]
    if not uppers:
        raise KeyError(f"allele {allele!r} at {locus!r} absent from every table")
    return max(floor, max(uppers))


def ceiling_profile_frequency(
    profile: MultiLocusProfile,
    tables: Sequence[PopulationTable],
    floor: float = DEFAULT_CEILING_FLOOR,
) -> GenotypeFrequency:
    """Simplified ceiling bound: per-allele max of upper limits across tables,
    floored, then Hardy-Weinberg and the product rule.

    Per-locus values are capped at 1 since ceiling allele frequencies need not
    sum to one.
    """
    if not tables:
        raise ValueError("ceiling bound needs at least one table")
    if not 0.0 <= floor <= 1.0:
        raise ValueError(f"floor must lie in [0, 1], got {floor!r}")
    value = 1.0
    for g in profile:
        ceil = {a: ceiling_allele_frequency(g.locus, a, tables, floor) for a in set(g.alleles)}
        value *= min(1.0, _hw(g, *_allele_freqs(g, ceil)))
    return GenotypeFrequency(value, "ceiling")


def sib_locus_probability(g: Genotype, freqs: Mapping[str, float]) -> float:
    """Probability a full sib of a person with genotype ``g`` shares it."""
    p, q = _allele_freqs(g, freqs)
    if g.homozygous:
        return (1.0 + p) ** 2 / 4.0
    return (1.0 + p + q + 2.0 * p * q) / 4.0


def sib_match_probability(
    profile: MultiLocusProfile, table: PopulationTable
) -> GenotypeFrequency:
    """Full-sibling match probability over all loci (computed without theta)."""
    value = 1.0
    for g in profile:
        value *= sib_locus_probability(g, table.alleles(g.locus))
    return GenotypeFrequency(value, "sib")
