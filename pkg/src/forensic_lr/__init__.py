"""Forensic DNA match statistics: genotype frequencies, likelihood ratios,
census-weighted population frequencies and conservative bounds."""

from forensic_lr.likelihood_engine import (
    EvidenceRecord,
    Hypothesis,
    LikelihoodRatio,
    Outcome,
    Relevance,
    TestOutcome,
    composite_alternative_lr,
    evidence_likelihood,
    likelihood_ratio,
    relevance_indicator,
)
from forensic_lr.match_stats import (
    Genotype,
    GenotypeFrequency,
    MultiLocusProfile,
    ceiling_profile_frequency,
    hw_genotype_freq,
    profile_frequency,
    sib_match_probability,
    theta_genotype_freq,
)
from forensic_lr.population_db import (
    CensusWeights,
    PopulationTable,
    TableError,
    apply_min_allele_floor,
    parse_allele_table,
    parse_allele_tables,
    parse_census_weights,
    validate_table,
)
from forensic_lr.population_mixture import (
    GroupFrequencySet,
    SensitivityRow,
    frequency_bounds,
    sensitivity_table,
    weighted_frequency,
)

__version__ = "0.1.0"
