"""Seeded Monte Carlo estimates of termination errors.

Rewards are drawn one at a time without replacement: with ``a`` positives
and ``b`` negatives still in the urn the next reward is positive with
probability ``a / (a + b)``. Every arrangement of the composition is then
equally likely, and an episode can stop drawing as soon as its rule fires.

Random streams
--------------
Each test owns a ``numpy.random.Generator`` backed by PCG64 (64-bit
output, 128-bit state). Its seed is ``SeedSequence(master_seed,
spawn_key=(test_index,))``, i.e. numpy's SeedSequence hash of the master
seed and the test index. Results depend only on ``(config, test_index)``,
so the worker count never changes a report.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import closed_form
from .episode import (
    COMPLETED,
    EpisodeOutcome,
    EpisodeSpec,
    Population,
    Reward,
    StoppingRule,
    step,
)
from .oracle import DEFAULT_DP_CAP, exact_probability

DEFAULT_TESTS = 20
DEFAULT_EPISODES = 30_000
SEED_LIMIT = 2**64

SAMPLING_MODES = ("direct", "filter")


def make_rng(master_seed: int, test_index: int) -> np.random.Generator:
    if not 0 <= master_seed < SEED_LIMIT:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(test_index,))))


def _first_draw(spec: EpisodeSpec, population: Population) -> tuple[int, int]:
    """Urn contents before the first random draw."""
    if population is Population.FIRST_NEGATIVE:
        if spec.neg_count == 0:
            raise ValueError("no episode can open with a negative reward when neg_count = 0")
        return spec.pos_count, spec.neg_count - 1
    return spec.pos_count, spec.neg_count


def draw_arrangement(
    spec: EpisodeSpec, rng: np.random.Generator, population: Population = Population.ALL
) -> tuple[Reward, ...]:
    """Draw a whole arrangement, consuming the generator exactly as :func:`simulate_episode` does."""
    population = Population.parse(population)
    pos_left, neg_left = _first_draw(spec, population)
    steps = [Reward.NEGATIVE] if population is Population.FIRST_NEGATIVE else []
    while pos_left + neg_left:
        if rng.random() * (pos_left + neg_left) < pos_left:
            steps.append(Reward.POSITIVE)
            pos_left -= 1
        else:
            steps.append(Reward.NEGATIVE)
            neg_left -= 1
    return tuple(steps)


def simulate_episode(
    spec: EpisodeSpec,
    rule: StoppingRule,
    rng: np.random.Generator,
    population: Population = Population.ALL,
) -> EpisodeOutcome:
    """Play one episode, drawing rewards only until the rule fires."""
    rule = StoppingRule.parse(rule)
    population = Population.parse(population)
    pos_left, neg_left = _first_draw(spec, population)
    pos = neg = 0
    forgiven = False
    t = 0
    if population is Population.FIRST_NEGATIVE:
        t = 1
        pos, neg, forgiven, fired = step(rule, pos, neg, forgiven, Reward.NEGATIVE)
        if fired:
            return EpisodeOutcome(True, 1)
    while pos_left + neg_left:
        t += 1
        if rng.random() * (pos_left + neg_left) < pos_left:
            reward = Reward.POSITIVE
            pos_left -= 1
        else:
            reward = Reward.NEGATIVE
            neg_left -= 1
        pos, neg, forgiven, fired = step(rule, pos, neg, forgiven, reward)
        if fired:
            return EpisodeOutcome(True, t)
    return COMPLETED


@dataclass
class BatchResult:
    stop_index: np.ndarray  # 0 where the episode ran to completion
    opened_positive: np.ndarray
    steps: Optional[np.ndarray] = None  # (episodes, total) of 0/1 when recorded

    @property
    def terminated(self) -> np.ndarray:
        return self.stop_index > 0


def simulate_batch(
    spec: EpisodeSpec,
    rule: StoppingRule,
    episodes: int,
    rng: np.random.Generator,
    population: Population = Population.ALL,
    *,
    record_steps: bool = False,
) -> BatchResult:
    """Vectorised :func:`simulate_episode` over ``episodes`` independent episodes.

    Mirrors :func:`termerr.episode.step` on arrays. One uniform is drawn per
    episode per trial; the loop ends once every episode has stopped, unless
    ``record_steps`` asks for the full arrangements.
    """
    rule = StoppingRule.parse(rule)
    population = Population.parse(population)
    pos_left0, neg_left0 = _first_draw(spec, population)

    pos_left = np.full(episodes, pos_left0, dtype=np.int64)
    pos_seen = np.zeros(episodes, dtype=np.int64)
    neg_seen = np.zeros(episodes, dtype=np.int64)
    forgiven = np.zeros(episodes, dtype=bool)
    stop = np.zeros(episodes, dtype=np.int64)
    alive = np.ones(episodes, dtype=bool)
    steps = np.zeros((episodes, spec.total), dtype=np.int8) if record_steps else None

    first_random = 1
    opened_positive = np.zeros(episodes, dtype=bool)
    if population is Population.FIRST_NEGATIVE:
        _, neg1, forgiven1, fired1 = step(rule, 0, 0, False, Reward.NEGATIVE)
        neg_seen[:] = neg1
        forgiven[:] = forgiven1
        if fired1:
            stop[:] = 1
            alive[:] = False
        first_random = 2

    for t in range(first_random, spec.total + 1):
        if steps is None and not alive.any():
            break
        remaining = spec.total - t + 1
        is_pos = rng.random(episodes) * remaining < pos_left
        is_neg = ~is_pos
        pos_left -= is_pos
        if t == 1:
            opened_positive = is_pos.copy()
        if steps is not None:
            steps[:, t - 1] = is_pos
        pos_seen += is_pos
        neg_seen += is_neg
        if rule is StoppingRule.RULE_II_FORGIVE or (rule is StoppingRule.RULE_II_LITERAL and t == 1):
            forgive_now = is_neg & ~forgiven
            forgiven |= forgive_now
        else:
            forgive_now = np.zeros(episodes, dtype=bool)
        fired = alive & ~forgive_now & (neg_seen - forgiven >= pos_seen)
        stop[fired] = t
        alive &= ~fired

    return BatchResult(stop, opened_positive, steps)


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``sampling`` only matters for the first-negative population: ``"direct"``
    forces the opening negative, ``"filter"`` plays unconditioned episodes
    and scores only those that happen to open with a negative.
    """

    spec: EpisodeSpec
    rule: StoppingRule = StoppingRule.RULE_I
    tests: int = DEFAULT_TESTS
    episodes_per_test: int = DEFAULT_EPISODES
    master_seed: int = 0
    population: Population = Population.ALL
    sampling: str = "direct"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rule", StoppingRule.parse(self.rule))
        object.__setattr__(self, "population", Population.parse(self.population))
        if self.tests < 1:
            raise ValueError("tests must be >= 1")
        if self.episodes_per_test < 1:
            raise ValueError("episodes_per_test must be >= 1")
        if not 0 <= self.master_seed < SEED_LIMIT:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}")
        if self.population is Population.FIRST_NEGATIVE and self.spec.neg_count == 0:
            raise ValueError("first-negative population is empty when neg_count = 0")


@dataclass(frozen=True)
class TestResult:
    failures: int
    episodes: int

    @property
    def error(self) -> Fraction:
        return Fraction(self.failures, self.episodes)


def run_test(config: ExperimentConfig, test_index: int) -> TestResult:
    """Play one test of ``config.episodes_per_test`` episodes and count failures."""
    rng = make_rng(config.master_seed, test_index)
    n = config.episodes_per_test
    if config.population is Population.FIRST_NEGATIVE and config.sampling == "filter":
        batch = simulate_batch(config.spec, config.rule, n, rng, Population.ALL)
        kept = ~batch.opened_positive
        if not kept.any():
            raise ValueError(f"test {test_index}: no episode opened with a negative reward")
        return TestResult(int(batch.terminated[kept].sum()), int(kept.sum()))
    batch = simulate_batch(config.spec, config.rule, n, rng, config.population)
    return TestResult(int(batch.terminated.sum()), n)


def theory_for(
    spec: EpisodeSpec, rule: StoppingRule, population: Population, *, cap: int = DEFAULT_DP_CAP
) -> tuple[Optional[Fraction], Optional[str]]:
    """Exact reference value for a (spec, rule, population) and where it came from.

    The closed forms cover Rule I over all arrangements and either Rule II
    reading over first-negative arrangements. Anything else falls back to
    the path-counting oracle when the episode fits under ``cap``.
    """
    if spec.admissible:
        if rule is StoppingRule.RULE_I and population is Population.ALL:
            return closed_form.p_rule1(spec), "closed-form"
        if rule is not StoppingRule.RULE_I and population is Population.FIRST_NEGATIVE:
            return closed_form.p_rule2(spec), "closed-form"
    if spec.total <= cap:
        return exact_probability(spec, rule, population, cap=cap).value, "path-count"
    return None, None


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    per_test: tuple[TestResult, ...]
    mean_error: float
    std_error: Optional[float]
    theory: Optional[Fraction]
    theory_source: Optional[str]
    abs_error: Optional[float]
    std_convention: str = field(default="sample")

    @property
    def per_test_error(self) -> list[Fraction]:
        return [t.error for t in self.per_test]

    @property
    def mean_exact(self) -> Fraction:
        return sum(self.per_test_error, Fraction(0)) / len(self.per_test)


def aggregate(per_test: list[Fraction]) -> tuple[float, Optional[float]]:
    """Mean and sample standard deviation (``None`` for a single test)."""
    mean = sum(per_test, Fraction(0)) / len(per_test)
    std = statistics.stdev(per_test) if len(per_test) > 1 else None
    return float(mean), (None if std is None else float(std))


def run_experiment(config: ExperimentConfig, *, workers: int = 1, with_theory: bool = True) -> ExperimentReport:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_test(config, i), range(config.tests)))
    else:
        results = [run_test(config, i) for i in range(config.tests)]
    mean, std = aggregate([r.error for r in results])
    theory = source = None
    if with_theory:
        theory, source = theory_for(config.spec, config.rule, config.population)
    return ExperimentReport(
        config=config,
        per_test=tuple(results),
        mean_error=mean,
        std_error=std,
        theory=theory,
        theory_source=source,
        abs_error=None if theory is None else abs(mean - float(theory)),
    )
