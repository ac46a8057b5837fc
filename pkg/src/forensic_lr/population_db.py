"""Allele-frequency tables and census population weights.

Tables are parsed from a flat CSV (``population,locus,allele,frequency,two_n``)
and census weights from ``group,percent``.  Both are immutable once built.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

SUM_TOLERANCE = 1e-9
LOW_SUM_WARNING = 0.9
MIN_ALLELE_COUNT = 5.0

ALLELE_HEADER = ("population", "locus", "allele", "frequency", "two_n")
CENSUS_HEADER = ("group", "percent")


class TableError(ValueError):
    """Raised for malformed allele tables or census files."""


@dataclass(frozen=True)
class PopulationTable:
    """Per-locus allele frequencies for one population group.

    ``frequencies`` maps locus -> {allele: frequency}; ``sample_sizes`` maps
    locus -> 2N (number of sampled allele copies) where known.
    """

    population: str
    frequencies: Mapping[str, Mapping[str, float]]
    sample_sizes: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.population:
            raise TableError("population label must be non-empty")
        frozen = {}
        for locus, alleles in self.frequencies.items():
            if not locus:
                raise TableError("locus name must be non-empty")
            for allele, freq in alleles.items():
                if not 0.0 < freq <= 1.0:
                    raise TableError(
                        f"{locus}/{allele}: frequency outside (0,1]: {freq!r}"
                    )
            frozen[locus] = MappingProxyType(dict(alleles))
        for locus, two_n in self.sample_sizes.items():
            if two_n <= 0:
                raise TableError(f"{locus}: sample size must be positive")
        object.__setattr__(self, "frequencies", MappingProxyType(frozen))
        object.__setattr__(
            self, "sample_sizes", MappingProxyType(dict(self.sample_sizes))
        )

    @property
    def loci(self) -> list[str]:
        return list(self.frequencies)

    def alleles(self, locus: str) -> Mapping[str, float]:
        try:
            return self.frequencies[locus]
        except KeyError:
            raise KeyError(f"locus {locus!r} not in table {self.population!r}") from None

    def frequency(self, locus: str, allele: str) -> float:
        alleles = self.alleles(locus)
        try:
            return alleles[allele]
        except KeyError:
            raise KeyError(
                f"allele {allele!r} at {locus!r} not in table {self.population!r}"
            ) from None

    def two_n(self, locus: str) -> int | None:
        return self.sample_sizes.get(locus)

    def locus_sum(self, locus: str) -> float:
        return sum(self.alleles(locus).values())


@dataclass(frozen=True)
class CensusWeights:
    """Ordered (group, proportion) pairs; proportions need not sum to one."""

    groups: tuple[tuple[str, float], ...]

    def __post_init__(self):
        labels = [g for g, _ in self.groups]
        if len(set(labels)) != len(labels):
            raise TableError("census group labels must be unique")
        for label, p in self.groups:
            if not 0.0 <= p <= 1.0:
                raise TableError(f"{label}: proportion outside [0,1]: {p!r}")
        if self.total > 1.0 + SUM_TOLERANCE:
            raise TableError(f"census proportions sum to {self.total!r} > 1")

    @property
    def total(self) -> float:
        return sum(p for _, p in self.groups)

    @property
    def labels(self) -> list[str]:
        return [g for g, _ in self.groups]

    def as_dict(self) -> dict[str, float]:
        return dict(self.groups)


@dataclass(frozen=True)
class Finding:
    severity: str  # "warning" | "error"
    locus: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_for_errors(self) -> None:
        if self.errors:
            msgs = "; ".join(f"{f.locus}: {f.message}" for f in self.errors)
            raise TableError(msgs)


def _data_lines(text: str) -> Iterable[str]:
    for line in text.splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            yield line


def _read_rows(text: str, header: tuple[str, ...]) -> list[tuple[int, dict]]:
    reader = csv.reader(_data_lines(text))
    try:
        first = [c.strip() for c in next(reader)]
    except StopIteration:
        raise TableError("empty file") from None
    required = [h for h in header if h != "two_n"]
    if first[: len(required)] != required or not set(first) <= set(header):
        raise TableError(f"bad header {first!r}; expected {','.join(header)}")
    rows = []
    for lineno, raw in enumerate(reader, start=2):
        cells = [c.strip() for c in raw]
        if len(cells) < len(required) or len(cells) > len(first):
            raise TableError(f"row {lineno}: expected {len(first)} fields, got {len(cells)}")
        cells += [""] * (len(first) - len(cells))
        rows.append((lineno, dict(zip(first, cells))))
    return rows


def _parse_float(value: str, what: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise TableError(f"row {lineno}: non-numeric {what} {value!r}") from None


def parse_allele_tables(text: str) -> dict[str, PopulationTable]:
    """Parse allele-table CSV content into one table per population.

    Populations are returned in first-appearance order.
    """
    freqs: dict[str, dict[str, dict[str, float]]] = {}
    sizes: dict[str, dict[str, int]] = {}
    for lineno, row in _read_rows(text, ALLELE_HEADER):
        pop, locus, allele = row["population"], row["locus"], row["allele"]
        if not (pop and locus and allele):
            raise TableError(f"row {lineno}: empty population, locus or allele")
        freq = _parse_float(row["frequency"], "frequency", lineno)
        if not 0.0 < freq <= 1.0:
            raise TableError(f"row {lineno}: frequency outside (0,1]: {freq!r}")
        by_locus = freqs.setdefault(pop, {}).setdefault(locus, {})
        if allele in by_locus:
            raise TableError(f"row {lineno}: duplicate key ({pop}, {locus}, {allele})")
        by_locus[allele] = freq
        two_n = row.get("two_n", "")
        if two_n:
            try:
                n = int(two_n)
            except ValueError:
                raise TableError(f"row {lineno}: non-integer two_n {two_n!r}") from None
            if n <= 0:
                raise TableError(f"row {lineno}: two_n must be positive")
            known = sizes.setdefault(pop, {}).setdefault(locus, n)
            if known != n:
                raise TableError(f"row {lineno}: conflicting two_n for {pop}/{locus}")
    return {
        pop: PopulationTable(pop, loci, sizes.get(pop, {}))
        for pop, loci in freqs.items()
    }


def parse_allele_table(text: str, population: str | None = None) -> PopulationTable:
    """Parse CSV content holding a single population (or select one by label)."""
    tables = parse_allele_tables(text)
    if population is not None:
        try:
            return tables[population]
        except KeyError:
            raise TableError(f"population {population!r} not in file") from None
    if len(tables) != 1:
        raise TableError(
            f"expected one population, found {len(tables)}: {sorted(tables)}"
        )
    return next(iter(tables.values()))


def format_allele_tables(tables: Iterable[PopulationTable]) -> str:
    """Serialize tables to the CSV schema; inverse of :func:`parse_allele_tables`."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ALLELE_HEADER)
    for table in tables:
        for locus, alleles in table.frequencies.items():
            two_n = table.two_n(locus)
            for allele, freq in alleles.items():
                writer.writerow(
                    [table.population, locus, allele, repr(freq), "" if two_n is None else two_n]
                )
    return out.getvalue()


def validate_table(table: PopulationTable) -> ValidationReport:
    findings = []
    for locus, alleles in table.frequencies.items():
        total = sum(alleles.values())
        nonpositive = [a for a, f in alleles.items() if f <= 0.0]
        if nonpositive:
            findings.append(Finding("error", locus, f"non-positive frequency for {nonpositive}"))
        if total > 1.0 + SUM_TOLERANCE:
            findings.append(Finding("error", locus, f"frequencies sum to {total:.6g} > 1"))
        elif total < LOW_SUM_WARNING:
            findings.append(
                Finding("warning", locus, f"frequencies sum to {total:.6g}; rare alleles probably missing")
            )
    return ValidationReport(tuple(findings))


def min_allele_frequency(two_n: int) -> float:
    return MIN_ALLELE_COUNT / two_n


def apply_min_allele_floor(
    table: PopulationTable, evidence_alleles: Iterable[tuple[str, str]]
) -> PopulationTable:
    """Raise evidence alleles to at least 5/(2N); insert them if unseen.

    Entries not named in ``evidence_alleles`` are left untouched.
    """
    updated = {locus: dict(alleles) for locus, alleles in table.frequencies.items()}
    for locus, allele in evidence_alleles:
        if locus not in updated:
            raise TableError(f"locus {locus!r} not in table {table.population!r}")
        observed = updated[locus].get(allele)
        two_n = table.two_n(locus)
        if two_n is None:
            if observed is None:
                raise TableError(
                    f"{table.population}/{locus}: sample size unknown, cannot floor unseen allele {allele!r}"
                )
            continue
        updated[locus][allele] = max(observed or 0.0, min_allele_frequency(two_n))
    return PopulationTable(table.population, updated, table.sample_sizes)


def parse_census_weights(text: str) -> CensusWeights:
    groups = []
    for lineno, row in _read_rows(text, CENSUS_HEADER):
        if not row["group"]:
            raise TableError(f"row {lineno}: empty group label")
        pct = _parse_float(row["percent"], "percent", lineno)
        if pct < 0:
            raise TableError(f"row {lineno}: negative percent {pct!r}")
        if pct > 100:
            raise TableError(f"row {lineno}: percent above 100: {pct!r}")
        groups.append((row["group"], pct / 100.0))
    return CensusWeights(tuple(groups))
