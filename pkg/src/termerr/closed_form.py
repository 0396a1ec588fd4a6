"""Exact closed-form termination errors, error reductions and bound solvers.

Every function returns a :class:`fractions.Fraction`; floats only appear
when a value is rendered with :func:`round_half_up`.

Symbols follow the usual episode parameterisation: ``x`` negatives,
``k`` positives per negative, margin ``r = pos - neg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from numbers import Rational
from typing import Union

from .episode import EpisodeSpec

RationalLike = Union[Fraction, int, float, str, Decimal]


class DomainError(ValueError):
    """A closed form was asked for outside the range where it holds."""


def as_fraction(value: RationalLike) -> Fraction:
    """Exact rational from an int, Fraction, Decimal or decimal string.

    Floats go through their shortest repr, so ``0.2`` becomes ``1/5``
    rather than the binary neighbour of 0.2.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, (Fraction, int, Decimal, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a rational number: {value!r}") from None
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def round_half_up(value: RationalLike, places: int = 4) -> str:
    """Decimal string of ``value`` rounded half-up (away from zero on ties).

    >>> round_half_up(Fraction(1, 33))
    '0.0303'
    """
    value = as_fraction(value)
    scaled = abs(value) * 10**places
    digits = math.floor(scaled + Fraction(1, 2))
    text = str(Decimal(digits).scaleb(-places).quantize(Decimal(1).scaleb(-places)))
    return "-" + text if value < 0 and digits else text


def _require_admissible(spec: EpisodeSpec) -> None:
    if not spec.admissible:
        raise DomainError(
            f"closed forms need pos > neg >= 1 (k in (1, inf)); got pos={spec.pos_count}, neg={spec.neg_count}"
        )


def _require_margin_inputs(neg_count: int, margin: int) -> None:
    if neg_count < 1 or margin < 1:
        raise DomainError(f"need neg_count >= 1 and margin >= 1; got x={neg_count}, r={margin}")


def p_rule1(spec: EpisodeSpec) -> Fraction:
    """Termination error of Rule I: ``2x / (x + kx) = 2 / (k + 1)``."""
    _require_admissible(spec)
    return Fraction(2 * spec.neg_count, spec.total)


def p_rule1_margin(neg_count: int, margin: int) -> Fraction:
    _require_margin_inputs(neg_count, margin)
    return Fraction(2 * neg_count, 2 * neg_count + margin)


def p_rule2(spec: EpisodeSpec) -> Fraction:
    """Rule II termination error ``2(x - 1) / (kx + x - 1)``.

    This is the Rule I error on the ``(pos, neg - 1)`` composition, i.e. the
    error over episodes that open with the forgiven negative reward.
    """
    _require_admissible(spec)
    return Fraction(2 * (spec.neg_count - 1), spec.total - 1)


def p_rule2_margin(neg_count: int, margin: int) -> Fraction:
    _require_margin_inputs(neg_count, margin)
    return Fraction(2 * (neg_count - 1), 2 * neg_count + margin - 1)


def reduction(spec: EpisodeSpec) -> Fraction:
    """Error removed by Rule II, ``2k / ((k + 1)((k + 1)x - 1))``, evaluated in ``k`` and ``x``."""
    _require_admissible(spec)
    k = spec.k
    x = spec.neg_count
    return 2 * k / ((k + 1) * ((k + 1) * x - 1))


def reduction_margin(neg_count: int, margin: int) -> Fraction:
    _require_margin_inputs(neg_count, margin)
    x, r = neg_count, margin
    return Fraction(2 * (x + r), (2 * x + r) * (2 * x + r - 1))


@dataclass(frozen=True)
class ErrorBound:
    """Ceiling ``M`` on the termination error, strictly between 0 and 1."""

    M: Fraction

    def __post_init__(self) -> None:
        value = as_fraction(self.M)
        object.__setattr__(self, "M", value)
        if not 0 < value < 1:
            raise DomainError(f"error bound must lie in (0, 1), got {value}")


def _bound(bound: "ErrorBound | RationalLike") -> Fraction:
    return bound.M if isinstance(bound, ErrorBound) else ErrorBound(as_fraction(bound)).M


def min_k_for_error_bound(bound: "ErrorBound | RationalLike") -> Fraction:
    """Smallest ``k`` with ``2 / (k + 1) <= M``: ``(2 - M) / M``."""
    m = _bound(bound)
    return (2 - m) / m


def min_margin_ratio_for_bound(bound: "ErrorBound | RationalLike") -> Fraction:
    """Smallest ``r / x`` with ``2x / (2x + r) <= M``: ``2(1 - M) / M``."""
    m = _bound(bound)
    return 2 * (1 - m) / m


def p_rule1_of_k(k: RationalLike) -> Fraction:
    """Rule I error as a function of ``k`` alone, for sweeps over non-integral ``k``."""
    k = as_fraction(k)
    if k <= 1:
        raise DomainError(f"k must exceed 1, got {k}")
    return 2 / (k + 1)


def p_rule1_of_margin_ratio(ratio: RationalLike) -> Fraction:
    """Rule I error as a function of ``r / x``: ``2 / (2 + r/x)``."""
    ratio = as_fraction(ratio)
    if ratio <= 0:
        raise DomainError(f"margin ratio must be positive, got {ratio}")
    return 2 / (2 + ratio)


@dataclass(frozen=True)
class TheoryReport:
    spec: EpisodeSpec
    p_rule1: Fraction
    p_rule2: Fraction
    reduction: Fraction
    k: Fraction
    margin: int
    margin_ratio: Fraction


def theory_report(spec: EpisodeSpec) -> TheoryReport:
    report = TheoryReport(
        spec=spec,
        p_rule1=p_rule1(spec),
        p_rule2=p_rule2(spec),
        reduction=reduction(spec),
        k=spec.k,
        margin=spec.margin,
        margin_ratio=spec.margin_ratio,
    )
    assert report.reduction == report.p_rule1 - report.p_rule2
    return report
