"""Episode compositions, reward sequences and the stopping rules that act on them.

A learning episode is a fixed multiset of positive and negative rewards
revealed one at a time. Reading positives as +1 and negatives as -1 turns
an ordering into a lattice walk ``y_0 = 0, y_1, ..., y_N``; the stopping
rules are first-passage conditions on that walk.

All rule execution goes through :func:`step`, so the sequence
evaluator, the path-counting oracle and the simulators share one
definition of every rule.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence


class Reward(enum.IntEnum):
    NEGATIVE = 0
    POSITIVE = 1


P = Reward.POSITIVE
N = Reward.NEGATIVE


class StoppingRule(enum.Enum):
    """Termination rules.

    ``RULE_I``
        stop at the first trial where cumulative negatives >= cumulative positives.
    ``RULE_II_FORGIVE``
        the first negative reward, wherever it occurs, is left out of both
        running counts (and is not itself checked); otherwise as ``RULE_I``.
    ``RULE_II_LITERAL``
        only a negative on trial 1 is forgiven. A negative on trial 2 right
        after it then stops the episode, since the counts read 0 vs 1.
    """

    RULE_I = "rule1"
    RULE_II_FORGIVE = "rule2"
    RULE_II_LITERAL = "rule2-literal"

    @classmethod
    def parse(cls, value: "str | StoppingRule") -> "StoppingRule":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown rule {value!r}; expected one of {names}") from None


class Population(enum.Enum):
    """Which arrangements an error rate is measured over.

    ``ALL`` weights every arrangement of the composition equally.
    ``FIRST_NEGATIVE`` restricts to arrangements whose first reward is
    negative, the episodes on which a Rule II forgiveness actually engages.
    """

    ALL = "all"
    FIRST_NEGATIVE = "first-negative"

    @classmethod
    def parse(cls, value: "str | Population") -> "Population":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown population {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class EpisodeSpec:
    """Composition of one episode: ``pos_count`` positives, ``neg_count`` negatives."""

    pos_count: int
    neg_count: int

    def __post_init__(self) -> None:
        for name in ("pos_count", "neg_count"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"{name} must be an int, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if self.total < 1:
            raise ValueError("an episode needs at least one reward")

    @property
    def total(self) -> int:
        return self.pos_count + self.neg_count

    @property
    def k(self) -> Fraction:
        """Ratio of positives to negatives; undefined when there are no negatives."""
        if self.neg_count == 0:
            raise ZeroDivisionError("k is undefined for an episode without negative rewards")
        return Fraction(self.pos_count, self.neg_count)

    @property
    def margin(self) -> int:
        return self.pos_count - self.neg_count

    @property
    def margin_ratio(self) -> Fraction:
        if self.neg_count == 0:
            raise ZeroDivisionError("margin ratio is undefined without negative rewards")
        return Fraction(self.margin, self.neg_count)

    @property
    def admissible(self) -> bool:
        """True when positives strictly outnumber negatives and there is at least one negative."""
        return self.pos_count > self.neg_count >= 1

    @classmethod
    def from_margin(cls, neg_count: int, margin: int) -> "EpisodeSpec":
        return cls(neg_count + margin, neg_count)

    @classmethod
    def from_k(cls, neg_count: int, k: "Fraction | int | str") -> "EpisodeSpec":
        pos = Fraction(k) * neg_count
        if pos.denominator != 1:
            raise ValueError(f"k = {k} with {neg_count} negatives gives a non-integer positive count")
        return cls(int(pos), neg_count)

    def __str__(self) -> str:
        return f"{self.pos_count} Pos {self.neg_count} Neg"


@dataclass(frozen=True)
class RewardSequence:
    spec: EpisodeSpec
    steps: tuple[Reward, ...]

    def __post_init__(self) -> None:
        if len(self.steps) != self.spec.total:
            raise ValueError(f"sequence has {len(self.steps)} steps, spec needs {self.spec.total}")
        n_pos = sum(1 for s in self.steps if s == Reward.POSITIVE)
        if n_pos != self.spec.pos_count:
            raise ValueError(f"sequence has {n_pos} positives, spec needs {self.spec.pos_count}")

    @classmethod
    def of(cls, steps: "Iterable[Reward | int | str]") -> "RewardSequence":
        """Build from rewards, 0/1 ints or a string such as ``"PPN"``."""
        parsed = tuple(_coerce_reward(s) for s in steps)
        n_pos = sum(parsed)
        return cls(EpisodeSpec(n_pos, len(parsed) - n_pos), parsed)

    def walk(self) -> list[int]:
        """Net displacement ``y_0..y_N``."""
        ys = [0]
        for s in self.steps:
            ys.append(ys[-1] + (1 if s == Reward.POSITIVE else -1))
        return ys

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return "".join("P" if s == Reward.POSITIVE else "N" for s in self.steps)


def _coerce_reward(value: "Reward | int | str") -> Reward:
    if isinstance(value, str):
        try:
            return {"P": Reward.POSITIVE, "N": Reward.NEGATIVE}[value.upper()]
        except KeyError:
            raise ValueError(f"bad reward symbol {value!r}") from None
    return Reward(int(value))


@dataclass(frozen=True)
class EpisodeOutcome:
    terminated_early: bool
    stop_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.terminated_early != (self.stop_index is not None):
            raise ValueError("stop_index must be given exactly when the episode terminated early")
        if self.stop_index is not None and self.stop_index < 1:
            raise ValueError("stop_index is 1-based")


COMPLETED = EpisodeOutcome(False)


def step(
    rule: StoppingRule, pos_seen: int, neg_seen: int, forgiven: bool, reward: int
) -> tuple[int, int, bool, bool]:
    """Advance ``rule`` by one reward.

    ``pos_seen``/``neg_seen`` count every reward drawn so far and
    ``forgiven`` records whether one negative has been set aside. The rule
    compares ``pos_seen`` with ``neg_seen - forgiven``; a forgiven negative
    is never itself checked.

    Returns ``(pos_seen, neg_seen, forgiven, fired)`` after the reward.
    """
    if reward:
        pos_seen += 1
    else:
        neg_seen += 1
        if not forgiven and (
            rule is StoppingRule.RULE_II_FORGIVE
            or (rule is StoppingRule.RULE_II_LITERAL and pos_seen + neg_seen == 1)
        ):
            return pos_seen, neg_seen, True, False
    return pos_seen, neg_seen, forgiven, neg_seen - forgiven >= pos_seen


def run_rule(seq: "RewardSequence | Sequence[Reward | int | str]", rule: StoppingRule) -> EpisodeOutcome:
    """Return where ``rule`` stops ``seq``, scanning it at most once."""
    if isinstance(seq, RewardSequence):
        steps = seq.steps
    elif isinstance(seq, str) or any(isinstance(s, str) for s in seq):
        steps = tuple(_coerce_reward(s) for s in seq)
    else:
        steps = seq  # 0/1 or Reward values; step() only tests truthiness
    pos = neg = 0
    forgiven = False
    for t, reward in enumerate(steps, start=1):
        pos, neg, forgiven, fired = step(rule, pos, neg, forgiven, reward)
        if fired:
            return EpisodeOutcome(True, t)
    return COMPLETED
