"""Case files, end-to-end evaluation and report rendering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from forensic_lr.likelihood_engine import (
    EvidenceRecord,
    Hypothesis,
    LikelihoodRatio,
    Outcome,
    TestOutcome,
    composite_alternative_lr,
    likelihood_ratio,
    relevance_indicator,
    uniform_weights,
)
from forensic_lr.match_stats import (
    DEFAULT_CEILING_FLOOR,
    RACE_BLIND_THETA,
    Genotype,
    MultiLocusProfile,
    ceiling_profile_frequency,
    profile_frequency,
    sib_match_probability,
)
from forensic_lr.population_db import (
    CensusWeights,
    PopulationTable,
    TableError,
    apply_min_allele_floor,
    parse_allele_tables,
    parse_census_weights,
    validate_table,
)
from forensic_lr.population_mixture import (
    PARTITION_TOLERANCE,
    GroupFrequency,
    GroupFrequencySet,
    SensitivityRow,
    format_sig,
    frequency_bounds,
    sensitivity_table,
    weighted_frequency,
)

DEFAULT_MULTIPLIERS = (1.0, 10.0, 100.0, 1000.0)
SECTIONS = ("Match", "Per-population", "General-population", "Bounds", "Sensitivity", "Notes")
UNKNOWN_ALTERNATIVE = "unknown"
CLOSED_SET_INFINITE_NOTE = (
    "all alternatives excluded - evidence impossible under every non-suspect hypothesis"
)


class CaseError(ValueError):
    """Malformed case file or inconsistent case contents."""


def parse_key_values(text: str) -> list[tuple[str, str]]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    pairs = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise CaseError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key in seen:
            raise CaseError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        pairs.append((key, value))
    return pairs


def parse_multipliers(text: str) -> tuple[float, ...]:
    try:
        ks = tuple(float(k) for k in text.split(",") if k.strip())
    except ValueError:
        raise CaseError(f"bad multipliers {text!r}") from None
    if not ks or any(k <= 0 for k in ks):
        raise CaseError("multipliers must be a non-empty list of positive numbers")
    return ks


@dataclass(frozen=True)
class CaseFile:
    evidence: Mapping[str, str]
    suspect: Mapping[str, str]
    outcomes: Mapping[str, str] = field(default_factory=dict)
    tables: Mapping[str, PopulationTable] = field(default_factory=dict)
    group_frequencies: Mapping[str, float] = field(default_factory=dict)
    census: CensusWeights | None = None
    theta: float = 0.0
    race_blind_theta: float = RACE_BLIND_THETA
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS
    ceiling_floor: float = DEFAULT_CEILING_FLOOR
    min_allele_floor: bool = True
    suspect_id: str = "suspect"

    def __post_init__(self):
        if set(self.evidence) != set(self.suspect):
            raise CaseError(
                f"evidence loci {sorted(self.evidence)} and suspect loci {sorted(self.suspect)} differ"
            )
        if not self.tables and not self.group_frequencies:
            raise CaseError("case needs allele tables (alleles.*) or profile frequencies (frequency.*)")
        overlap = set(self.tables) & set(self.group_frequencies)
        if overlap:
            raise CaseError(f"groups given both allele tables and frequencies: {sorted(overlap)}")
        if self.tables and not self.evidence:
            raise CaseError("allele tables need evidence.* and suspect.* genotypes")
        if self.census is None:
            raise CaseError("case needs a census file")
        if not 0.0 <= self.theta < 1.0:
            raise CaseError(f"theta outside [0,1): {self.theta!r}")
        for gid in self.outcomes:
            if gid == self.suspect_id:
                raise CaseError("outcome.* lines describe other individuals, not the suspect")

    @property
    def groups(self) -> list[str]:
        """Group labels in census order, then any others in case-file order."""
        given = list(self.tables) + list(self.group_frequencies)
        census = [g for g in self.census.labels if g in given]
        return census + [g for g in given if g not in census]


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_table(path: Path, group: str) -> PopulationTable:
    tables = parse_allele_tables(_read(path))
    if group in tables:
        return tables[group]
    if len(tables) == 1:
        only = next(iter(tables.values()))
        return PopulationTable(group, only.frequencies, only.sample_sizes)
    raise TableError(f"{path}: no population {group!r} (found {sorted(tables)})")


def load_case(path: str | Path) -> CaseFile:
    """Read a key-value case file; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    evidence, suspect, outcomes, tables, freqs = {}, {}, {}, {}, {}
    kwargs = {}
    census = None
    for key, value in parse_key_values(_read(path)):
        prefix, dot, name = key.partition(".")
        if dot and not name:
            raise CaseError(f"empty name in key {key!r}")
        try:
            if prefix == "evidence" and dot:
                evidence[name] = value
            elif prefix == "suspect" and dot:
                suspect[name] = value
            elif prefix == "outcome" and dot:
                outcomes[name] = Outcome(value).value
            elif prefix == "alleles" and dot:
                tables[name] = _load_table(base / value, name)
            elif prefix == "frequency" and dot:
                freqs[name] = float(value)
            elif key == "census":
                census = parse_census_weights(_read(base / value))
            elif key in ("theta", "race_blind_theta", "floor"):
                kwargs["ceiling_floor" if key == "floor" else key] = float(value)
            elif key == "multipliers":
                kwargs["multipliers"] = parse_multipliers(value)
            elif key == "min_allele_floor":
                if value.lower() not in ("true", "false"):
                    raise CaseError(f"min_allele_floor must be true or false, got {value!r}")
                kwargs["min_allele_floor"] = value.lower() == "true"
            elif key == "suspect_id":
                kwargs["suspect_id"] = value
            else:
                raise CaseError(f"unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, (CaseError, TableError)):
                raise
            raise CaseError(f"bad value for {key!r}: {value!r}") from None
    return CaseFile(
        evidence=evidence,
        suspect=suspect,
        outcomes=outcomes,
        tables=tables,
        group_frequencies=freqs,
        census=census,
        **kwargs,
    )


@dataclass(frozen=True)
class GroupResult:
    group: str
    weight: float | None
    frequency: float
    lr: LikelihoodRatio


@dataclass(frozen=True)
class MatchReport:
    status: str  # "match" | "exclusion"
    loci: tuple[str, ...]
    mismatched_loci: tuple[str, ...] = ()
    theta: float = 0.0
    groups: tuple[GroupResult, ...] = ()
    most_conservative: tuple[str, float] | None = None
    race_blind_frequency: float | None = None
    race_blind_theta: float = RACE_BLIND_THETA
    general_frequency: float | None = None
    uncovered_weight: float | None = None
    sensitivity: tuple[SensitivityRow, ...] = ()
    bounds: tuple[float, float] | None = None
    sib_bound: float | None = None
    ceiling_bound: float | None = None
    closed_set_lr: LikelihoodRatio | None = None
    notes: tuple[str, ...] = ()

    @property
    def is_exclusion(self) -> bool:
        return self.status == "exclusion"


def _profile(genotypes: Mapping[str, str]) -> MultiLocusProfile:
    return MultiLocusProfile(Genotype(locus, pair) for locus, pair in genotypes.items())


def _mismatches(case: CaseFile) -> list[str]:
    out = []
    for locus in case.evidence:
        if Genotype(locus, case.evidence[locus]) != Genotype(locus, case.suspect[locus]):
            out.append(locus)
    return out


def _prepare_tables(case: CaseFile, profile: MultiLocusProfile | None) -> dict[str, PopulationTable]:
    prepared = {}
    for group, table in case.tables.items():
        validate_table(table).raise_for_errors()
        if case.min_allele_floor and profile is not None:
            table = apply_min_allele_floor(table, profile.alleles())
        prepared[group] = table
    return prepared


def _pooled_table(tables: Mapping[str, PopulationTable], census: CensusWeights) -> PopulationTable:
    weights = {g: census.as_dict().get(g, 0.0) for g in tables}
    if sum(weights.values()) <= 0.0:
        weights = {g: 1.0 for g in tables}
    total = sum(weights.values())
    pooled: dict[str, dict[str, float]] = {}
    for group, table in tables.items():
        w = weights[group] / total
        for locus, alleles in table.frequencies.items():
            dest = pooled.setdefault(locus, {})
            for allele, p in alleles.items():
                dest[allele] = dest.get(allele, 0.0) + w * p
    return PopulationTable("pooled", {l: {a: p for a, p in al.items() if p > 0} for l, al in pooled.items()})


def run_case(case: CaseFile) -> MatchReport:
    """Compare profiles and, on a match, compute every statistic in the report."""
    loci = tuple(case.evidence)
    mismatched = _mismatches(case)
    if mismatched:
        return MatchReport(
            status="exclusion",
            loci=loci,
            mismatched_loci=tuple(mismatched),
            theta=case.theta,
            notes=(f"profiles differ at {', '.join(mismatched)}; suspect excluded as the source",),
        )

    notes = []
    profile = _profile(case.evidence) if case.evidence else None
    if profile is None:
        notes.append("no genotypes supplied; match taken as reported with profile-level frequencies")
    tables = _prepare_tables(case, profile)
    weights = case.census.as_dict()

    freqs = dict(case.group_frequencies)
    for group, table in tables.items():
        freqs[group] = profile_frequency(profile, table, case.theta).value

    others = dict(case.outcomes)
    groups = []
    for group in case.groups:
        f = freqs[group]
        outcomes = [TestOutcome(case.suspect_id, Outcome.MATCHED, f)]
        outcomes += [TestOutcome(i, Outcome(o), f) for i, o in others.items()]
        outcomes.append(TestOutcome(UNKNOWN_ALTERNATIVE, Outcome.UNTESTED, f))
        record = EvidenceRecord(tuple(outcomes), case.suspect_id)
        lr = likelihood_ratio(record, Hypothesis(UNKNOWN_ALTERNATIVE))
        groups.append(GroupResult(group, weights.get(group), f, lr))
        if group not in weights:
            notes.append(f"group {group!r} is not in the census; excluded from the mixture")

    worst = max(groups, key=lambda r: r.frequency)
    most_conservative = (worst.group, worst.frequency)

    closed_set_lr = None
    if others:
        record = EvidenceRecord(
            (TestOutcome(case.suspect_id, Outcome.MATCHED, worst.frequency),)
            + tuple(TestOutcome(i, Outcome(o), worst.frequency) for i, o in others.items()),
            case.suspect_id,
        )
        closed_set_lr = composite_alternative_lr(record, uniform_weights(others))
        if closed_set_lr.is_infinite:
            notes.append(CLOSED_SET_INFINITE_NOTE)
        notes.append(
            f"closed-set LR uses equal weights over the {len(others)} other tested individuals"
            f" and the most conservative frequency ({worst.group}); relevance: "
            f"{relevance_indicator(closed_set_lr).value}"
        )

    covered = GroupFrequencySet(
        tuple(GroupFrequency(r.group, r.weight, r.frequency) for r in groups if r.weight is not None)
    )
    general = bounds = None
    uncovered = None
    rows: list[SensitivityRow] = []
    if covered.groups and covered.is_partition(PARTITION_TOLERANCE):
        general = weighted_frequency(covered).value
        positive = GroupFrequencySet(tuple(g for g in covered.groups if g.weight > 0))
        bounds = frequency_bounds(positive)
    else:
        uncovered = max(0.0, 1.0 - covered.total_weight)
        rows = sensitivity_table(covered, uncovered, worst.frequency, case.multipliers)
        notes.append(
            f"groups with frequencies cover {covered.total_weight:.3f} of the population; "
            f"sensitivity rows use the largest group frequency ({worst.group}) as reference"
        )

    race_blind = sib = ceiling = None
    if tables:
        pooled = _pooled_table(tables, case.census)
        race_blind = profile_frequency(profile, pooled, case.race_blind_theta).value
        sib = max(sib_match_probability(profile, t).value for t in tables.values())
        ceiling = ceiling_profile_frequency(profile, list(tables.values()), case.ceiling_floor).value
        notes.append(
            f"race-blind figure: census-weighted pooled allele frequencies with theta = {case.race_blind_theta:g}"
        )
        notes.append("sib bound computed at theta = 0 (largest over groups)")
    else:
        notes.append("race-blind, sib and ceiling figures need allele tables; not computed")

    notes.append(
        "each frequency is the chance that an unrelated person picked at random from the group "
        "would share the evidence profile; each LR is its reciprocal"
    )

    return MatchReport(
        status="match",
        loci=loci,
        theta=case.theta,
        groups=tuple(groups),
        most_conservative=most_conservative,
        race_blind_frequency=race_blind,
        race_blind_theta=case.race_blind_theta,
        general_frequency=general,
        uncovered_weight=uncovered,
        sensitivity=tuple(rows),
        bounds=bounds,
        sib_bound=sib,
        ceiling_bound=ceiling,
        closed_set_lr=closed_set_lr,
        notes=tuple(notes),
    )


def _num(x: float) -> str:
    if math.isinf(x):
        return "infinite"
    return repr(float(x))


def _lr_token(lr: LikelihoodRatio) -> str:
    if lr.is_undefined:
        return "undefined"
    return _num(lr.value)


def _structured(r: MatchReport) -> list[tuple[str, str]]:
    kv = [("status", r.status), ("loci", ",".join(r.loci))]
    if r.is_exclusion:
        kv.append(("mismatched_loci", ",".join(r.mismatched_loci)))
    else:
        kv.append(("theta", _num(r.theta)))
        for g in r.groups:
            if g.weight is not None:
                kv.append((f"group.{g.group}.weight", _num(g.weight)))
            kv.append((f"group.{g.group}.frequency", _num(g.frequency)))
            kv.append((f"group.{g.group}.lr.numerator", _num(g.lr.numerator)))
            kv.append((f"group.{g.group}.lr.denominator", _num(g.lr.denominator)))
            kv.append((f"group.{g.group}.lr", _lr_token(g.lr)))
        kv.append(("most_conservative.group", r.most_conservative[0]))
        kv.append(("most_conservative.frequency", _num(r.most_conservative[1])))
        if r.race_blind_frequency is not None:
            kv.append(("race_blind.theta", _num(r.race_blind_theta)))
            kv.append(("race_blind.frequency", _num(r.race_blind_frequency)))
        if r.general_frequency is not None:
            kv.append(("general.frequency", _num(r.general_frequency)))
        if r.bounds is not None:
            kv.append(("bounds.lower", _num(r.bounds[0])))
            kv.append(("bounds.upper", _num(r.bounds[1])))
        if r.sib_bound is not None:
            kv.append(("bounds.sib", _num(r.sib_bound)))
        if r.ceiling_bound is not None:
            kv.append(("bounds.ceiling", _num(r.ceiling_bound)))
        if r.uncovered_weight is not None:
            kv.append(("sensitivity.uncovered_weight", _num(r.uncovered_weight)))
        for i, row in enumerate(r.sensitivity):
            kv.append((f"sensitivity.{i}.multiplier", _num(row.multiplier)))
            kv.append((f"sensitivity.{i}.uncovered_frequency", _num(row.uncovered_frequency)))
            kv.append((f"sensitivity.{i}.contribution", _num(row.contribution)))
            kv.append((f"sensitivity.{i}.total", _num(row.total)))
        if r.closed_set_lr is not None:
            kv.append(("closed_set.lr.numerator", _num(r.closed_set_lr.numerator)))
            kv.append(("closed_set.lr.denominator", _num(r.closed_set_lr.denominator)))
            kv.append(("closed_set.lr", _lr_token(r.closed_set_lr)))
    for i, note in enumerate(r.notes):
        kv.append((f"note.{i}", note))
    return kv


def _lr_text(lr: LikelihoodRatio) -> str:
    if lr.is_undefined:
        return "undefined"
    if lr.is_infinite:
        return CLOSED_SET_INFINITE_NOTE
    return format_sig(lr.value)


def _text(r: MatchReport, timestamp: str | None) -> list[str]:
    body: dict[str, list[str]] = {s: [] for s in SECTIONS}
    body["Match"].append(f"status: {r.status}")
    body["Match"].append(f"loci compared: {', '.join(r.loci) if r.loci else '(none supplied)'}")
    if r.is_exclusion:
        body["Match"].append(f"mismatched loci: {', '.join(r.mismatched_loci)}")
    else:
        for g in r.groups:
            w = "not in census" if g.weight is None else f"weight {g.weight:.3f}"
            body["Per-population"].append(
                f"{g.group}: frequency {format_sig(g.frequency)}  LR {_lr_text(g.lr)}  ({w})"
            )
        group, f = r.most_conservative
        body["Per-population"].append(f"most conservative: {group} {format_sig(f)}")
        if r.race_blind_frequency is not None:
            body["General-population"].append(
                f"race-blind (theta = {r.race_blind_theta:g}): {format_sig(r.race_blind_frequency)}"
            )
        if r.general_frequency is not None:
            body["General-population"].append(f"weighted frequency: {format_sig(r.general_frequency)}")
        elif r.uncovered_weight is not None:
            body["General-population"].append(
                f"incomplete partition ({r.uncovered_weight:.3f} uncovered); see Sensitivity"
            )
        if r.bounds is not None:
            body["Bounds"].append(f"convexity: [{format_sig(r.bounds[0])}, {format_sig(r.bounds[1])}]")
        if r.sib_bound is not None:
            body["Bounds"].append(f"sib method: {format_sig(r.sib_bound)}")
        if r.ceiling_bound is not None:
            body["Bounds"].append(f"ceiling: {format_sig(r.ceiling_bound)}")
        if r.closed_set_lr is not None:
            body["Per-population"].append(f"closed-set LR: {_lr_text(r.closed_set_lr)}")
        for row in r.sensitivity:
            body["Sensitivity"].append(
                f"k = {row.multiplier:g}: other-group frequency {format_sig(row.uncovered_frequency)}"
                f"  contribution {format_sig(row.contribution)}  total {format_sig(row.total)}"
            )
    body["Notes"].extend(r.notes)
    if timestamp:
        body["Notes"].append(f"generated {timestamp}")
    lines = []
    for section in SECTIONS:
        lines.append(f"== {section} ==")
        lines.extend(body[section] or ["-"])
        lines.append("")
    return lines


def emit_report(r: MatchReport, fmt: str = "text", timestamp: bool = False) -> str:
    """Render ``r`` as ``text`` (3 significant figures) or ``structured`` key-value lines."""
    if fmt == "structured":
        return "".join(f"{k} = {v}\n" for k, v in _structured(r))
    if fmt == "text":
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if timestamp else None
        return "\n".join(_text(r, stamp))
    raise ValueError(f"unknown format {fmt!r}; expected 'text' or 'structured'")


def parse_structured(text: str) -> dict[str, float | str]:
    """Read structured output back; numeric values become floats."""
    out: dict[str, float | str] = {}
    for key, value in parse_key_values(text):
        if value == "infinite":
            out[key] = math.inf
        elif key.startswith("note.") or value == "undefined":
            out[key] = value
        else:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def with_overrides(
    case: CaseFile,
    theta: float | None = None,
    floor: float | None = None,
    multipliers: Sequence[float] | None = None,
) -> CaseFile:
    changes = {}
    if theta is not None:
        changes["theta"] = theta
    if floor is not None:
        changes["ceiling_floor"] = floor
    if multipliers is not None:
        changes["multipliers"] = tuple(multipliers)
    return replace(case, **changes) if changes else case
