"""Likelihoods of DNA test outcomes under competing source hypotheses.

Each tested individual either matched the trace, was excluded, or was not
tested.  Under the hypothesis that individual ``s`` is the source, ``s`` is
certain to match and every other individual matches independently with
their own coincidence frequency ``f``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

WEIGHT_TOLERANCE = 1e-9
LOG_SPACE_THRESHOLD = 50


class Outcome(str, enum.Enum):
    MATCHED = "matched"
    EXCLUDED = "excluded"
    UNTESTED = "untested"


class Relevance(str, enum.Enum):
    TENDS_TO_PROVE = "tends-to-prove"
    TENDS_TO_DISPROVE = "tends-to-disprove"
    NEUTRAL = "neutral"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False  # not a pytest class

    individual: str
    outcome: Outcome
    frequency: float  # chance an unrelated non-source would match

    def __post_init__(self):
        object.__setattr__(self, "outcome", Outcome(self.outcome))
        if not 0.0 < self.frequency < 1.0:
            raise ValueError(
                f"{self.individual}: coincidence frequency must lie in (0,1), got {self.frequency!r}"
            )


@dataclass(frozen=True)
class EvidenceRecord:
    outcomes: tuple[TestOutcome, ...]
    suspect: str
    _ids: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        ids = [o.individual for o in self.outcomes]
        if len(set(ids)) != len(ids):
            raise ValueError("each individual must have exactly one outcome")
        if self.suspect not in ids:
            raise ValueError(f"suspect {self.suspect!r} has no outcome")
        object.__setattr__(self, "_ids", frozenset(ids))

    @classmethod
    def build(
        cls,
        suspect: str,
        outcomes: Mapping[str, str | Outcome],
        frequencies: Mapping[str, float] | float,
    ) -> "EvidenceRecord":
        """Convenience constructor; ``frequencies`` may be a common scalar."""
        if isinstance(frequencies, (int, float)):
            frequencies = {i: float(frequencies) for i in outcomes}
        return cls(
            tuple(TestOutcome(i, Outcome(o), frequencies[i]) for i, o in outcomes.items()),
            suspect,
        )

    @property
    def individuals(self) -> list[str]:
        return [o.individual for o in self.outcomes]

    @property
    def others(self) -> list[str]:
        """Non-suspect individuals; their count is ``n``."""
        return [i for i in self.individuals if i != self.suspect]

    def outcome_of(self, individual: str) -> TestOutcome:
        for o in self.outcomes:
            if o.individual == individual:
                return o
        raise KeyError(individual)


@dataclass(frozen=True)
class Hypothesis:
    source: str


class _ScaledProduct:
    """Running product kept as mantissa * 2**exponent so it cannot underflow."""

    __slots__ = ("mantissa", "exponent")

    def __init__(self):
        self.mantissa = 1.0
        self.exponent = 0

    def mul(self, x: float) -> None:
        m, e = math.frexp(self.mantissa * x)
        self.mantissa = m
        self.exponent += e

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0.0

    def log(self) -> float:
        if self.is_zero:
            return -math.inf
        return math.log(self.mantissa) + self.exponent * math.log(2.0)

    def value(self) -> float:
        return math.ldexp(self.mantissa, self.exponent)


def _factor(o: TestOutcome, source: str) -> float:
    if o.outcome is Outcome.UNTESTED:
        return 1.0
    if o.individual == source:
        return 1.0 if o.outcome is Outcome.MATCHED else 0.0
    return o.frequency if o.outcome is Outcome.MATCHED else 1.0 - o.frequency


def _check_hypothesis(e: EvidenceRecord, h: Hypothesis) -> None:
    if h.source not in e._ids:
        raise ValueError(f"hypothesised source {h.source!r} not in the evidence record")


def _likelihood(e: EvidenceRecord, h: Hypothesis) -> _ScaledProduct:
    _check_hypothesis(e, h)
    prod = _ScaledProduct()
    for o in e.outcomes:
        f = _factor(o, h.source)
        if f != 1.0:
            prod.mul(f)
    return prod


def _linear_likelihood(e: EvidenceRecord, h: Hypothesis) -> float:
    _check_hypothesis(e, h)
    return math.prod(_factor(o, h.source) for o in e.outcomes)


def evidence_likelihood(e: EvidenceRecord, h: Hypothesis) -> float:
    """P(E | h): product of per-individual outcome probabilities.

    Large records (more than 50 others) are accumulated with exponent
    tracking; the result may still underflow to 0.0 when converted back to a
    float, in which case use :func:`log_evidence_likelihood`.
    """
    if len(e.outcomes) - 1 <= LOG_SPACE_THRESHOLD:
        return _linear_likelihood(e, h)
    return _likelihood(e, h).value()


def log_evidence_likelihood(e: EvidenceRecord, h: Hypothesis) -> float:
    return _likelihood(e, h).log()


@dataclass(frozen=True)
class LikelihoodRatio:
    """P(E|suspect) / P(E|alternative) with explicit infinite and undefined states.

    ``value`` is ``math.inf`` when only the denominator is zero and ``None``
    when both are (0/0 is never coerced to a number).
    """

    numerator: float
    denominator: float
    value: float | None

    def __post_init__(self):
        for name in ("numerator", "denominator"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name} must be a probability, got {x!r}")

    @classmethod
    def from_probabilities(cls, numerator: float, denominator: float) -> "LikelihoodRatio":
        if denominator == 0.0:
            value = None if numerator == 0.0 else math.inf
        else:
            value = numerator / denominator
        return cls(numerator, denominator, value)

    @property
    def is_undefined(self) -> bool:
        return self.value is None

    @property
    def is_infinite(self) -> bool:
        return self.value == math.inf

    def __str__(self) -> str:
        if self.is_undefined:
            return "undefined"
        if self.is_infinite:
            return "infinite"
        return f"{self.value:.3g}"


def _ratio(num: _ScaledProduct, den: _ScaledProduct) -> LikelihoodRatio:
    n, d = num.value(), den.value()
    if den.is_zero:
        value = None if num.is_zero else math.inf
    elif num.is_zero:
        value = 0.0
    else:
        value = math.ldexp(num.mantissa / den.mantissa, num.exponent - den.exponent)
    return LikelihoodRatio(n, d, value)


def likelihood_ratio(e: EvidenceRecord, alt: Hypothesis) -> LikelihoodRatio:
    """LR of the suspect-as-source hypothesis against ``alt``.

    When only the suspect was tested (and matched) this is exactly 1/f.
    """
    if alt.source == e.suspect:
        raise ValueError("alternative hypothesis must name someone other than the suspect")
    return _ratio(_likelihood(e, Hypothesis(e.suspect)), _likelihood(e, alt))


def composite_alternative_lr(
    e: EvidenceRecord, weights: Mapping[str, float]
) -> LikelihoodRatio:
    """LR against a weighted mixture of non-suspect source hypotheses."""
    if e.suspect in weights:
        raise ValueError("composite alternative must not include the suspect")
    if any(w < 0 for w in weights.values()):
        raise ValueError("weights must be nonnegative")
    total = sum(weights.values())
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise ValueError(f"alternative weights sum to {total!r}, not 1")
    nonzero = {i: w for i, w in weights.items() if w > 0.0}
    if len(nonzero) == 1:
        (only,) = nonzero
        return likelihood_ratio(e, Hypothesis(only))
    num = _likelihood(e, Hypothesis(e.suspect))
    parts = [(w, _likelihood(e, Hypothesis(i))) for i, w in nonzero.items()]
    live = [(w, p) for w, p in parts if not p.is_zero]
    den = _ScaledProduct()
    if not live:
        den.mantissa = 0.0
    else:
        # sum of w * m * 2**e, rescaled to the largest exponent
        top = max(p.exponent for _, p in live)
        acc = math.fsum(w * math.ldexp(p.mantissa, p.exponent - top) for w, p in live)
        den.mul(acc)
        den.exponent += top
    return _ratio(num, den)


def uniform_weights(individuals: Iterable[str]) -> dict[str, float]:
    ids = list(individuals)
    return {i: 1.0 / len(ids) for i in ids}


def relevance_indicator(lr: LikelihoodRatio) -> Relevance:
    if lr.is_undefined:
        return Relevance.UNDEFINED
    v = lr.value
    if v > 1.0:
        return Relevance.TENDS_TO_PROVE
    if v < 1.0:
        return Relevance.TENDS_TO_DISPROVE
    return Relevance.NEUTRAL
