"""Formula-free termination probabilities by counting reward arrangements.

Two independent routes are provided:

* :func:`count_paths` runs a forward dynamic program over
  ``(positives drawn, negatives drawn, forgiven)`` with Python integers,
  moving the mass of every path the rule stops into an absorbing bucket.
* :func:`brute_force_probability` enumerates every arrangement and calls
  :func:`termerr.episode.run_rule` on it.

Neither touches the closed forms, which is what makes them usable as a
check on them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterator, Sequence

from .episode import (
    EpisodeSpec,
    Population,
    Reward,
    RewardSequence,
    StoppingRule,
    run_rule,
    step,
)

DEFAULT_DP_CAP = 2000
BRUTE_FORCE_CAP = 24


class CapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class PathCount:
    terminating: int
    total: int

    def __post_init__(self) -> None:
        if not 0 <= self.terminating <= self.total:
            raise ValueError(f"inconsistent path count {self.terminating}/{self.total}")

    @property
    def probability(self) -> Fraction:
        return Fraction(self.terminating, self.total)


@dataclass(frozen=True)
class ExactProbability:
    value: Fraction

    def __post_init__(self) -> None:
        if not 0 <= self.value <= 1:
            raise ValueError(f"probability out of range: {self.value}")

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return f"{self.value.numerator}/{self.value.denominator}"


def population_size(spec: EpisodeSpec, population: Population = Population.ALL) -> int:
    """Number of distinct arrangements in ``population``."""
    if population is Population.ALL:
        return comb(spec.total, spec.neg_count)
    if spec.neg_count == 0:
        raise ValueError("no arrangement opens with a negative reward when neg_count = 0")
    return comb(spec.total - 1, spec.neg_count - 1)


def _prefix(spec: EpisodeSpec, population: Population) -> tuple[Reward, ...]:
    population_size(spec, population)  # validates
    return () if population is Population.ALL else (Reward.NEGATIVE,)


def _count(spec: EpisodeSpec, rule: StoppingRule, prefix: Sequence[Reward]) -> tuple[int, int]:
    """(terminating, surviving) counts over arrangements that begin with ``prefix``."""
    pos_total, neg_total = spec.pos_count, spec.neg_count
    pos = neg = 0
    forgiven = False
    for reward in prefix:
        pos, neg, forgiven, fired = step(rule, pos, neg, forgiven, reward)
        if fired:
            return comb(spec.total - pos - neg, neg_total - neg), 0

    terminated = 0
    layer: dict[tuple[int, int, bool], int] = {(pos, neg, forgiven): 1}
    for _ in range(spec.total - pos - neg):
        nxt: dict[tuple[int, int, bool], int] = {}
        for (p, n, f), ways in layer.items():
            for reward, room in ((Reward.POSITIVE, p < pos_total), (Reward.NEGATIVE, n < neg_total)):
                if not room:
                    continue
                p2, n2, f2, fired = step(rule, p, n, f, reward)
                if fired:
                    # every completion of a stopped prefix is a terminating arrangement
                    terminated += ways * comb(spec.total - p2 - n2, neg_total - n2)
                else:
                    key = (p2, n2, f2)
                    nxt[key] = nxt.get(key, 0) + ways
        layer = nxt
    return terminated, sum(layer.values())


def _check_cap(spec: EpisodeSpec, cap: int) -> None:
    if spec.total > cap:
        raise CapExceeded(f"episode of {spec.total} steps exceeds the path-counting cap of {cap}")


def count_paths(
    spec: EpisodeSpec,
    rule: StoppingRule,
    population: Population = Population.ALL,
    *,
    cap: int = DEFAULT_DP_CAP,
) -> PathCount:
    """Exact number of arrangements in ``population`` that ``rule`` stops early."""
    _check_cap(spec, cap)
    population = Population.parse(population)
    terminated, surviving = _count(spec, StoppingRule.parse(rule), _prefix(spec, population))
    total = population_size(spec, population)
    if terminated + surviving != total:
        raise AssertionError(f"path-count leak: {terminated} + {surviving} != {total}")
    return PathCount(terminated, total)


def exact_probability(
    spec: EpisodeSpec,
    rule: StoppingRule,
    population: Population = Population.ALL,
    *,
    cap: int = DEFAULT_DP_CAP,
) -> ExactProbability:
    return ExactProbability(count_paths(spec, rule, population, cap=cap).probability)


def arrangements(spec: EpisodeSpec, population: Population = Population.ALL) -> Iterator[tuple[int, ...]]:
    """Every distinct ordering as 0/1 tuples (1 = positive), by lexicographic negative positions."""
    population = Population.parse(population)
    population_size(spec, population)
    for negs in itertools.combinations(range(spec.total), spec.neg_count):
        if population is Population.FIRST_NEGATIVE and negs[0] != 0:
            continue
        seq = [1] * spec.total
        for i in negs:
            seq[i] = 0
        yield tuple(seq)


def brute_force_probability(
    spec: EpisodeSpec,
    rule: StoppingRule,
    population: Population = Population.ALL,
) -> ExactProbability:
    if spec.total > BRUTE_FORCE_CAP:
        raise CapExceeded(f"enumeration is limited to {BRUTE_FORCE_CAP} steps, got {spec.total}")
    rule = StoppingRule.parse(rule)
    hits = total = 0
    for seq in arrangements(spec, population):
        total += 1
        hits += run_rule(seq, rule).terminated_early
    return ExactProbability(Fraction(hits, total))


def reflection_check(spec: EpisodeSpec, *, cap: int = DEFAULT_DP_CAP) -> tuple[int, int]:
    """``(A, B)``: up-first arrangements that later reach the axis, and down-first arrangements.

    ``A`` comes from the path-counting DP; ``B`` is ``C(total - 1, pos)``.
    """
    if not spec.admissible:
        raise ValueError(f"reflection identity needs pos > neg >= 1, got {spec}")
    _check_cap(spec, cap)
    touching, _ = _count(spec, StoppingRule.RULE_I, (Reward.POSITIVE,))
    return touching, comb(spec.total - 1, spec.pos_count)


def reflect_prefix(seq: "RewardSequence | Sequence[Reward]") -> tuple[Reward, ...]:
    """Swap every step up to and including the first return to the axis.

    Maps up-first walks that return to zero onto down-first walks that
    return to zero, and back; raises if ``seq`` never returns.
    """
    steps = tuple(seq.steps if isinstance(seq, RewardSequence) else seq)
    y = 0
    for i, s in enumerate(steps):
        y += 1 if s == Reward.POSITIVE else -1
        if y == 0:
            flipped = tuple(Reward(1 - r) for r in steps[: i + 1])
            return flipped + steps[i + 1 :]
    raise ValueError("walk never returns to the axis")
