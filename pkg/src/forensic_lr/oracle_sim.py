"""Monte Carlo and enumeration oracles for the closed-form match statistics.

Random streams use numpy's PCG64.  Trials are split into fixed-size blocks
and block ``b`` draws from ``PCG64(SeedSequence([seed, b]))``, so results
depend only on ``(seed, trials, block_size)`` and never on how many lanes
process the blocks.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from forensic_lr.match_stats import Genotype, MultiLocusProfile
from forensic_lr.population_db import PopulationTable

DEFAULT_BLOCK_SIZE = 1 << 16
MIN_ACCEPTED = 100


class InsufficientDataError(RuntimeError):
    """Too few accepted samples to report an estimate."""


@dataclass(frozen=True)
class SimConfig:
    seed: int
    trials: int
    lanes: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.lanes < 1 or self.block_size < 1:
            raise ValueError("lanes and block_size must be >= 1")

    def block_rng(self, block: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, block])))

    def rng(self) -> np.random.Generator:
        return self.block_rng(0)


@dataclass(frozen=True)
class EstimateWithError:
    estimate: float
    std_error: float
    trials: int

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "EstimateWithError":
        p = hits / trials
        return cls(p, math.sqrt(p * (1.0 - p) / trials), trials)

    def within(self, expected: float, sigmas: float = 4.0) -> bool:
        return abs(self.estimate - expected) <= sigmas * self.std_error


def _block_sizes(total: int, block_size: int) -> list[int]:
    full, rest = divmod(total, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _run_blocks(
    cfg: SimConfig,
    work: Callable[[np.random.Generator, int], np.ndarray],
    total: int | None = None,
    stop: Callable[[np.ndarray], bool] | None = None,
) -> tuple[np.ndarray, int]:
    """Sum per-block integer tallies; returns (tallies, trials used).

    With ``stop``, blocks run in waves of ``lanes`` and the result is cut back
    to the shortest block prefix that satisfies ``stop``, which keeps the
    answer independent of the lane count.
    """
    sizes = _block_sizes(cfg.trials if total is None else total, cfg.block_size)

    def one(b: int) -> np.ndarray:
        return np.asarray(work(cfg.block_rng(b), sizes[b]), dtype=np.int64)

    acc = None
    used = 0
    with ThreadPoolExecutor(max_workers=cfg.lanes) as pool:
        for start in range(0, len(sizes), cfg.lanes):
            wave = range(start, min(start + cfg.lanes, len(sizes)))
            for b, tally in zip(wave, pool.map(one, wave)):
                acc = tally if acc is None else acc + tally
                used += sizes[b]
                if stop is not None and stop(acc):
                    return acc, used
    return acc, used


def _locus_arrays(table: PopulationTable, locus: str) -> tuple[list[str], np.ndarray]:
    alleles = table.alleles(locus)
    if not alleles:
        raise ValueError(f"locus {locus!r} has no alleles")
    labels = list(alleles)
    p = np.array([alleles[a] for a in labels], dtype=float)
    return labels, p / p.sum()


def _target_indices(g: Genotype, labels: list[str]) -> tuple[int, int]:
    try:
        return labels.index(g.alleles[0]), labels.index(g.alleles[1])
    except ValueError:
        raise KeyError(f"target allele at {g.locus!r} not in table") from None


def _draw(rng: np.random.Generator, p: np.ndarray, shape) -> np.ndarray:
    # inverse-CDF draw; clamp guards against cumsum rounding just below 1
    cdf = np.cumsum(p)
    return np.minimum(np.searchsorted(cdf, rng.random(shape), side="right"), len(p) - 1)


def _is_genotype(a: np.ndarray, b: np.ndarray, i: int, j: int) -> np.ndarray:
    return ((a == i) & (b == j)) | ((a == j) & (b == i))


def sample_profile(
    table: PopulationTable, loci: Sequence[str], rng: np.random.Generator
) -> MultiLocusProfile:
    """Draw one random-mating profile: two independent alleles per locus."""
    genotypes = []
    for locus in loci:
        labels, p = _locus_arrays(table, locus)
        a, b = _draw(rng, p, 2)
        genotypes.append(Genotype(locus, labels[a], labels[b]))
    return MultiLocusProfile(genotypes)


def estimate_match_probability(
    target: MultiLocusProfile, table: PopulationTable, cfg: SimConfig
) -> EstimateWithError:
    """Fraction of random profiles identical to ``target``."""
    plan = []
    for g in target:
        labels, p = _locus_arrays(table, g.locus)
        plan.append((p, _target_indices(g, labels)))

    def work(rng, n):
        hit = np.ones(n, dtype=bool)
        for p, (i, j) in plan:
            draws = _draw(rng, p, (2, n))
            hit &= _is_genotype(draws[0], draws[1], i, j)
        return [hit.sum()]

    (hits,), trials = _run_blocks(cfg, work)
    return EstimateWithError.from_counts(int(hits), trials)


def estimate_sib_match_probability(
    target: MultiLocusProfile,
    table: PopulationTable,
    cfg: SimConfig,
    min_accepted: int | None = None,
) -> EstimateWithError:
    """Conditional-acceptance estimate of the full-sib match probability.

    Each trial draws two random-mating parents and a first child.  Families
    whose first child carries ``target`` are accepted, and a second child is
    drawn from the same parents.  The estimate is the matching fraction of
    second children; ``trials`` on the result counts accepted families.

    ``cfg.trials`` caps the number of families drawn.  With ``min_accepted``
    sampling stops early once that many families were accepted.
    """
    plan = []
    for g in target:
        labels, p = _locus_arrays(table, g.locus)
        plan.append((p, _target_indices(g, labels)))

    def work(rng, n):
        first_ok = np.ones(n, dtype=bool)
        second_ok = np.ones(n, dtype=bool)
        rows = np.arange(n)
        for p, (i, j) in plan:
            parents = _draw(rng, p, (n, 4))  # father a, father b, mother a, mother b
            picks = rng.integers(0, 2, size=(n, 4))  # two transmissions per child
            c1 = (parents[rows, picks[:, 0]], parents[rows, 2 + picks[:, 1]])
            c2 = (parents[rows, picks[:, 2]], parents[rows, 2 + picks[:, 3]])
            first_ok &= _is_genotype(*c1, i, j)
            second_ok &= _is_genotype(*c2, i, j)
        return [first_ok.sum(), (first_ok & second_ok).sum()]

    stop = None if min_accepted is None else (lambda acc: acc[0] >= min_accepted)
    (accepted, matched), _ = _run_blocks(cfg, work, stop=stop)
    if accepted < MIN_ACCEPTED:
        raise InsufficientDataError(
            f"only {accepted} accepted families (need {MIN_ACCEPTED}); increase trials"
        )
    return EstimateWithError.from_counts(int(matched), int(accepted))


def estimate_theta_match_probability(
    g: Genotype, freqs: Mapping[str, float], theta: float, cfg: SimConfig
) -> EstimateWithError:
    """Conditional match probability when subpopulation allele frequencies
    scatter around ``freqs`` as Dirichlet(p (1-theta)/theta).

    Four alleles are drawn from one subpopulation; trials whose first pair is
    ``g`` are accepted and the estimate is the fraction whose second pair is
    ``g`` too.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1) for the Dirichlet oracle")
    cats = [freqs[a] for a in dict.fromkeys(g.alleles)]
    rest = 1.0 - sum(cats)
    if rest > 1e-12:
        cats.append(rest)
    alpha = np.array(cats) * (1.0 - theta) / theta
    i = 0
    j = 0 if g.homozygous else 1

    def work(rng, n):
        x = rng.dirichlet(alpha, size=n)
        cdf = np.cumsum(x, axis=1)
        u = rng.random((n, 4))
        draws = np.minimum((u[:, :, None] > cdf[:, None, :]).sum(axis=2), len(alpha) - 1)
        first = _is_genotype(draws[:, 0], draws[:, 1], i, j)
        second = _is_genotype(draws[:, 2], draws[:, 3], i, j)
        return [first.sum(), (first & second).sum()]

    (accepted, matched), _ = _run_blocks(cfg, work)
    if accepted < MIN_ACCEPTED:
        raise InsufficientDataError(f"only {accepted} accepted trials")
    return EstimateWithError.from_counts(int(matched), int(accepted))


def enumerate_sib_match_probability(g: Genotype, freqs: Mapping[str, float]) -> float:
    """Exact sib match probability by enumerating every ordered parental
    genotype pair and every Mendelian transmission to two children.

    Alleles other than those in ``g`` are lumped into one category carrying
    the remaining probability mass.
    """
    cats = {a: freqs[a] for a in g.alleles}
    rest = 1.0 - sum(cats.values())
    if rest > 0.0:
        cats["<other>"] = rest
    target = tuple(sorted(g.alleles))
    joint = 0.0
    marginal = 0.0
    for parents in itertools.product(cats, repeat=4):
        weight = math.prod(cats[a] for a in parents)
        father, mother = parents[:2], parents[2:]
        for t in itertools.product((0, 1), repeat=4):
            first = tuple(sorted((father[t[0]], mother[t[1]])))
            if first != target:
                continue
            second = tuple(sorted((father[t[2]], mother[t[3]])))
            w = weight / 16.0
            marginal += w
            if second == target:
                joint += w
    return joint / marginal


@dataclass(frozen=True)
class BuildingSimulation:
    """Tallies of which residents matched, over repeated random sources."""

    residents: int
    trials: int
    pattern_counts: Mapping[tuple[int, ...], int]
    only_source_matches: EstimateWithError


def simulate_closed_building(n: int, f: float, cfg: SimConfig) -> BuildingSimulation:
    """Locked-building experiment with one source and ``n`` other residents.

    Each trial picks a source uniformly among the ``n + 1`` residents; the
    source always matches and everyone else matches with probability ``f``.
    Patterns are keyed by the sorted indices of matching residents.
    """
    if n < 1:
        raise ValueError("need at least one resident besides the source")
    if not 0.0 < f < 1.0:
        raise ValueError("f must lie in (0, 1)")
    residents = n + 1
    tallies: list[Counter] = []

    def work(rng, size):
        source = rng.integers(0, residents, size=size)
        matched = rng.random((size, residents)) < f
        matched[np.arange(size), source] = True
        rows, counts = np.unique(np.packbits(matched, axis=1), axis=0, return_counts=True)
        tally = Counter()
        for row, c in zip(rows, counts):
            bits = np.unpackbits(row)[:residents]
            tally[tuple(int(k) for k in np.flatnonzero(bits))] = int(c)
        tallies.append(tally)
        return [(matched.sum(axis=1) == 1).sum()]

    # tallies are merged with a Counter so ordering between lanes is irrelevant
    (only,), trials = _run_blocks(cfg, work)
    merged: Counter = Counter()
    for t in tallies:
        merged.update(t)
    return BuildingSimulation(
        residents, trials, dict(sorted(merged.items())), EstimateWithError.from_counts(int(only), trials)
    )
