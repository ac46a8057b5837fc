import math

import pytest
from hypothesis import assume, given, strategies as st

from forensic_lr.match_stats import (
    Genotype,
    MultiLocusProfile,
    ceiling_profile_frequency,
    hw_genotype_freq,
    profile_frequency,
    sib_locus_probability,
    sib_match_probability,
    theta_genotype_freq,
    upper95,
)
from forensic_lr.oracle_sim import SimConfig, enumerate_sib_match_probability, estimate_theta_match_probability
from forensic_lr.population_db import PopulationTable


def _rising(a, k):
    return math.prod(a + r for r in range(k))


def dirichlet_match_oracle(g, freqs, theta):
    """Conditional match probability from Dirichlet moments (independent of
    the closed form): P(two more copies of g | g observed)."""
    lam = (1 - theta) / theta
    if g.homozygous:
        a = lam * freqs[g.alleles[0]]
        return (_rising(a, 4) / _rising(lam, 4)) / (_rising(a, 2) / _rising(lam, 2))
    a, b = (lam * freqs[x] for x in g.alleles)
    e_x2y2 = _rising(a, 2) * _rising(b, 2) / _rising(lam, 4)
    e_xy = a * b / _rising(lam, 2)
    return 2 * e_x2y2 / e_xy


class TestGenotype:
    def test_canonical_order(self):
        assert Genotype("L", "17", "14").alleles == ("14", "17")
        assert Genotype("L", "17/14") == Genotype("L", "14", "17")

    def test_homozygote(self):
        assert Genotype("L", "5/5").homozygous
        assert not Genotype("L", "5/6").homozygous

    def test_profile_rejects_duplicate_loci(self):
        with pytest.raises(ValueError, match="duplicate"):
            MultiLocusProfile([Genotype("L", "1/2"), Genotype("L", "3/4")])

    def test_profile_rejects_empty(self):
        with pytest.raises(ValueError):
            MultiLocusProfile([])


class TestHardyWeinberg:
    def test_homozygote(self):
        assert hw_genotype_freq(Genotype("L", "a", "a"), {"a": 0.2}).value == pytest.approx(0.04)

    def test_heterozygote(self):
        assert hw_genotype_freq(Genotype("L", "a", "b"), {"a": 0.1, "b": 0.3}).value == pytest.approx(0.06)

    def test_symmetric(self):
        assert hw_genotype_freq(Genotype("L", "a", "b"), {"a": 0.5, "b": 0.5}).value == 0.5

    def test_missing_allele(self):
        with pytest.raises(KeyError):
            hw_genotype_freq(Genotype("L", "a", "b"), {"a": 0.5})

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            hw_genotype_freq(Genotype("L", "a", "b"), {"a": 0.5, "b": 0.0})

    @given(st.lists(st.floats(0.001, 1.0), min_size=1, max_size=8))
    def test_genotype_sum_is_square_of_allele_sum(self, ps):
        scale = max(1.0, sum(ps))
        ps = [p / scale for p in ps]
        freqs = {str(i): p for i, p in enumerate(ps)}
        total = sum(
            hw_genotype_freq(Genotype("L", a, b), freqs).value
            for i, a in enumerate(freqs)
            for b in list(freqs)[i:]
        )
        assert total == pytest.approx(sum(ps) ** 2, rel=1e-12)


class TestTheta:
    def test_zero_theta_is_hw(self):
        g = Genotype("L", "a", "b")
        freqs = {"a": 0.13, "b": 0.27}
        assert theta_genotype_freq(g, freqs, 0.0).value == hw_genotype_freq(g, freqs).value

    def test_homozygote_value(self):
        g = Genotype("L", "a", "a")
        v = theta_genotype_freq(g, {"a": 0.1}, 0.03).value
        assert v == pytest.approx(0.026890456127495882, rel=1e-12)
        assert v == pytest.approx(dirichlet_match_oracle(g, {"a": 0.1}, 0.03), rel=1e-12)
        assert round(v, 5) == 0.02689

    def test_homozygote_monte_carlo(self):
        g = Genotype("L", "a", "a")
        est = estimate_theta_match_probability(g, {"a": 0.1}, 0.03, SimConfig(seed=7, trials=4_000_000))
        assert est.within(theta_genotype_freq(g, {"a": 0.1}, 0.03).value)

    def test_common_heterozygote_value(self):
        # The correction lowers the match probability for a 0.5/0.5 heterozygote;
        # closed form and Dirichlet oracle agree on 0.48585 (< 2pq = 0.5).
        g = Genotype("L", "a", "b")
        freqs = {"a": 0.5, "b": 0.5}
        v = theta_genotype_freq(g, freqs, 0.03).value
        assert v == pytest.approx(0.4858490566037736, rel=1e-12)
        assert v == pytest.approx(dirichlet_match_oracle(g, freqs, 0.03), rel=1e-12)
        assert v < 0.5

    def test_common_heterozygote_monte_carlo(self):
        g = Genotype("L", "a", "b")
        freqs = {"a": 0.5, "b": 0.5}
        est = estimate_theta_match_probability(g, freqs, 0.03, SimConfig(seed=11, trials=400_000))
        assert est.within(theta_genotype_freq(g, freqs, 0.03).value)

    @pytest.mark.parametrize("theta", [-0.1, 1.0])
    def test_theta_range(self, theta):
        with pytest.raises(ValueError):
            theta_genotype_freq(Genotype("L", "a", "a"), {"a": 0.1}, theta)

    @given(st.floats(1e-4, 0.99), st.floats(1e-4, 0.999))
    def test_homozygote_conservative(self, p, theta):
        g = Genotype("L", "a", "a")
        assert theta_genotype_freq(g, {"a": p}, theta).value >= hw_genotype_freq(g, {"a": p}).value

    @given(st.floats(1e-4, 0.4), st.floats(1e-4, 0.4), st.floats(1e-4, 0.999))
    def test_heterozygote_conservative_for_typical_alleles(self, p, q, theta):
        assume(p + q <= 0.75)
        g = Genotype("L", "a", "b")
        freqs = {"a": p, "b": q}
        assert theta_genotype_freq(g, freqs, theta).value >= hw_genotype_freq(g, freqs).value * (1 - 1e-12)

    @given(st.floats(1e-4, 0.5), st.floats(1e-4, 0.5), st.floats(1e-3, 0.5), st.booleans())
    def test_matches_dirichlet_oracle(self, p, q, theta, homozygous):
        g = Genotype("L", "a", "a") if homozygous else Genotype("L", "a", "b")
        freqs = {"a": p, "b": q}
        assert theta_genotype_freq(g, freqs, theta).value == pytest.approx(
            dirichlet_match_oracle(g, freqs, theta), rel=1e-9
        )


def _table(**loci):
    return PopulationTable("P", loci)


class TestProfileFrequency:
    def test_product(self, toy_table):
        profile = MultiLocusProfile.from_mapping({"D3S1358": "14/15", "vWA": "16/16"})
        assert profile_frequency(profile, toy_table).value == pytest.approx(0.06 * 0.04)
        assert profile_frequency(profile, toy_table).value == pytest.approx(0.0024)

    def test_single_locus(self, toy_table):
        profile = MultiLocusProfile.from_mapping({"vWA": "17/18"})
        assert profile_frequency(profile, toy_table).value == pytest.approx(0.3)

    def test_nine_loci(self):
        # two alleles at 0.5 and sqrt(0.05)/... : pick a homozygote with p^2 = 0.05
        p = math.sqrt(0.05)
        table = PopulationTable("P", {f"L{i}": {"a": p, "b": 1 - p} for i in range(9)})
        profile = MultiLocusProfile(Genotype(f"L{i}", "a", "a") for i in range(9))
        assert profile_frequency(profile, table).value == pytest.approx(0.05**9, rel=1e-12)
        assert profile_frequency(profile, table).value == pytest.approx(1.953125e-12, rel=1e-12)

    def test_missing_locus(self, toy_table):
        with pytest.raises(KeyError):
            profile_frequency(MultiLocusProfile.from_mapping({"TPOX": "8/8"}), toy_table)

    def test_theta_applied_per_locus(self, toy_table):
        profile = MultiLocusProfile.from_mapping({"D3S1358": "14/15", "vWA": "16/16"})
        expected = math.prod(
            theta_genotype_freq(g, toy_table.alleles(g.locus), 0.03).value for g in profile
        )
        assert profile_frequency(profile, toy_table, 0.03).value == pytest.approx(expected, rel=1e-15)

    @given(st.floats(0.01, 0.4), st.floats(0.01, 0.4), st.floats(0.0, 0.2))
    def test_monotone(self, p, q, bump):
        t1 = _table(L={"a": p, "b": q})
        t2 = _table(L={"a": p + bump, "b": q})
        for pair in ("a/b", "a/a"):
            profile = MultiLocusProfile.from_mapping({"L": pair})
            assert profile_frequency(profile, t2).value >= profile_frequency(profile, t1).value


class TestCeiling:
    def test_floor_dominates(self):
        tables = [_table(L={"a": f, "z": 0.5}) for f in (0.01, 0.02, 0.03)]
        profile = MultiLocusProfile.from_mapping({"L": "a/a"})
        assert ceiling_profile_frequency(profile, tables, 0.05).value == pytest.approx(0.05**2)

    def test_max_dominates(self):
        tables = [_table(L={"a": 0.30}), _table(L={"a": 0.10})]
        profile = MultiLocusProfile.from_mapping({"L": "a/a"})
        assert ceiling_profile_frequency(profile, tables, 0.05).value == pytest.approx(0.30**2)

    def test_upper_confidence_limit(self):
        assert upper95(0.25, 400) == pytest.approx(0.2924352447854375, rel=1e-12)
        assert round(upper95(0.25, 400), 4) == 0.2924
        table = PopulationTable("P", {"L": {"a": 0.25}}, {"L": 400})
        profile = MultiLocusProfile.from_mapping({"L": "a/a"})
        assert ceiling_profile_frequency(profile, [table], 0.05).value == pytest.approx(0.2924352447854375**2)

    def test_absent_everywhere(self):
        with pytest.raises(KeyError, match="absent"):
            ceiling_profile_frequency(MultiLocusProfile.from_mapping({"L": "q/q"}), [_table(L={"a": 0.5})])

    def test_capped_at_one(self):
        tables = [_table(L={"a": 0.9, "b": 0.9})]
        profile = MultiLocusProfile.from_mapping({"L": "a/b"})
        assert ceiling_profile_frequency(profile, tables).value == 1.0

    @given(st.lists(st.tuples(st.floats(0.01, 0.5), st.floats(0.01, 0.5)), min_size=1, max_size=4), st.floats(0, 0.1))
    def test_dominates_each_table(self, pairs, floor):
        tables = [_table(L={"a": p, "b": q}) for p, q in pairs]
        for pair in ("a/b", "a/a"):
            profile = MultiLocusProfile.from_mapping({"L": pair})
            ceil = ceiling_profile_frequency(profile, tables, floor).value
            for t in tables:
                assert ceil >= profile_frequency(profile, t).value


class TestSib:
    def test_heterozygote(self):
        g = Genotype("L", "a", "b")
        freqs = {"a": 0.5, "b": 0.5}
        assert sib_locus_probability(g, freqs) == 0.625
        assert enumerate_sib_match_probability(g, freqs) == pytest.approx(0.625, rel=1e-12)

    def test_homozygote(self):
        g = Genotype("L", "a", "a")
        freqs = {"a": 0.5, "b": 0.5}
        assert sib_locus_probability(g, freqs) == 0.5625
        assert enumerate_sib_match_probability(g, freqs) == pytest.approx(0.5625, rel=1e-12)

    @given(st.floats(1e-4, 0.5), st.floats(1e-4, 0.5), st.booleans())
    def test_matches_enumeration(self, p, q, homozygous):
        g = Genotype("L", "a", "a") if homozygous else Genotype("L", "a", "b")
        freqs = {"a": p, "b": q}
        closed = sib_locus_probability(g, freqs)
        assert closed >= 0.25
        assert closed == pytest.approx(enumerate_sib_match_probability(g, freqs), rel=1e-12)

    def test_profile_product(self, toy_table):
        profile = MultiLocusProfile.from_mapping({"D3S1358": "14/15", "vWA": "16/16"})
        assert sib_match_probability(profile, toy_table).value == pytest.approx(0.365 * 0.36)

    @given(st.lists(st.tuples(st.floats(1e-3, 0.5), st.floats(1e-3, 0.5), st.booleans()), min_size=1, max_size=9))
    def test_exceeds_random_match(self, loci):
        table = PopulationTable("P", {f"L{i}": {"a": p, "b": q} for i, (p, q, _) in enumerate(loci)})
        profile = MultiLocusProfile(
            Genotype(f"L{i}", "a", "a" if hom else "b") for i, (_, _, hom) in enumerate(loci)
        )
        assert sib_match_probability(profile, table).value >= profile_frequency(profile, table).value


@given(st.floats(1e-3, 0.5), st.floats(1e-3, 0.5), st.floats(0, 0.5), st.booleans())
def test_all_frequencies_in_unit_interval(p, q, theta, hom):
    table = PopulationTable("P", {"L": {"a": p, "b": q}})
    profile = MultiLocusProfile.from_mapping({"L": "a/a" if hom else "a/b"})
    for f in (
        profile_frequency(profile, table, theta),
        ceiling_profile_frequency(profile, [table]),
        sib_match_probability(profile, table),
    ):
        assert 0 < f.value <= 1
