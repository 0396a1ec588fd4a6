from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from termerr.episode import (
    EpisodeOutcome,
    EpisodeSpec,
    N,
    P,
    RewardSequence,
    StoppingRule,
    run_rule,
)

from conftest import sequences

R1, R2, R2L = StoppingRule.RULE_I, StoppingRule.RULE_II_FORGIVE, StoppingRule.RULE_II_LITERAL


@pytest.mark.parametrize(
    "steps, rule, expected",
    [
        ("PPN", R1, EpisodeOutcome(False)),
        ("NPP", R1, EpisodeOutcome(True, 1)),
        ("PNP", R1, EpisodeOutcome(True, 2)),
        ("NPP", R2, EpisodeOutcome(False)),
        ("NNPPPP", R2L, EpisodeOutcome(True, 2)),
        # forgiven negative late in the sequence, the next one stops it
        ("PNNPP", R2, EpisodeOutcome(True, 3)),
        ("PNNPP", R2L, EpisodeOutcome(True, 2)),
        ("NPNPP", R2L, EpisodeOutcome(True, 3)),
        ("NPPNP", R2L, EpisodeOutcome(False)),
    ],
)
def test_run_rule_examples(steps, rule, expected):
    assert run_rule(RewardSequence.of(steps), rule) == expected


def test_string_and_int_inputs_agree():
    assert run_rule("PNP", R1) == run_rule([1, 0, 1], R1) == run_rule((P, N, P), R1)


def test_single_negative_episode():
    assert run_rule("N", R1) == EpisodeOutcome(True, 1)
    assert run_rule("N", R2) == EpisodeOutcome(False)
    assert run_rule("N", R2L) == EpisodeOutcome(False)


def _walk_terminates(steps):
    y = 0
    for t, s in enumerate(steps, start=1):
        y += 1 if s == P else -1
        if y <= 0:
            return t
    return None


@given(sequences())
def test_rule1_matches_walk_formulation(steps):
    out = run_rule(steps, R1)
    assert out.stop_index == _walk_terminates(steps)


@given(sequences())
def test_first_negative_stops_rule1_at_once(steps):
    steps = (N,) + steps
    assert run_rule(steps, R1) == EpisodeOutcome(True, 1)


@given(sequences())
def test_forgive_equals_rule1_after_deleting_first_negative(steps):
    if N not in steps:
        assert not run_rule(steps, R2).terminated_early
        return
    i = steps.index(N)
    reduced = steps[:i] + steps[i + 1 :]
    expected = run_rule(reduced, R1)
    got = run_rule(steps, R2)
    assert got.terminated_early == expected.terminated_early
    if got.terminated_early:
        # the deleted negative precedes any stop, so indices shift by one
        assert got.stop_index == expected.stop_index + 1


@given(sequences())
def test_literal_equals_rule1_when_first_step_positive(steps):
    steps = (P,) + steps
    assert run_rule(steps, R2L) == run_rule(steps, R1)


@pytest.mark.parametrize("rule", list(StoppingRule), ids=lambda r: r.value)
@given(n=st.integers(1, 20))
def test_no_negative_never_terminates(n, rule):
    assert run_rule((P,) * n, rule) == EpisodeOutcome(False)


@given(sequences())
def test_rule1_always_stops_when_negatives_not_outnumbered(steps):
    pos = sum(1 for s in steps if s == P)
    if pos <= len(steps) - pos:
        assert run_rule(steps, R1).terminated_early


@given(sequences())
def test_rule_ii_never_stops_when_rule_i_survives(steps):
    if not run_rule(steps, R1).terminated_early:
        assert not run_rule(steps, R2).terminated_early
        assert not run_rule(steps, R2L).terminated_early


@pytest.mark.parametrize("rule", list(StoppingRule), ids=lambda r: r.value)
@given(steps=sequences())
def test_outcome_index_within_episode(steps, rule):
    out = run_rule(steps, rule)
    assert out.terminated_early == (out.stop_index is not None)
    if out.terminated_early:
        assert 1 <= out.stop_index <= len(steps)


def test_walk_endpoints():
    seq = RewardSequence.of("PPNPN")
    assert seq.walk() == [0, 1, 2, 1, 2, 1]
    assert seq.walk()[-1] == seq.spec.margin


class TestEpisodeSpec:
    def test_derived_values(self):
        spec = EpisodeSpec(45, 30)
        assert spec.total == 75
        assert spec.k == Fraction(3, 2)
        assert spec.margin == 15
        assert spec.margin_ratio == Fraction(1, 2)
        assert spec.k * spec.neg_count == spec.pos_count
        assert spec.margin_ratio * spec.neg_count == spec.margin

    @pytest.mark.parametrize("pos, neg, ok", [(2, 1, True), (1, 1, False), (3, 0, False), (0, 3, False), (4, 3, True)])
    def test_admissible(self, pos, neg, ok):
        assert EpisodeSpec(pos, neg).admissible is ok

    @pytest.mark.parametrize("pos, neg", [(0, 0), (-1, 2), (2, -1)])
    def test_rejects_bad_counts(self, pos, neg):
        with pytest.raises(ValueError):
            EpisodeSpec(pos, neg)

    def test_rejects_non_int(self):
        with pytest.raises(TypeError):
            EpisodeSpec(2.0, 1)

    def test_alternate_constructors(self):
        assert EpisodeSpec.from_margin(10, 180) == EpisodeSpec(190, 10)
        assert EpisodeSpec.from_k(30, "3/2") == EpisodeSpec(45, 30)
        with pytest.raises(ValueError):
            EpisodeSpec.from_k(3, Fraction(3, 2))

    def test_k_undefined_without_negatives(self):
        with pytest.raises(ZeroDivisionError):
            EpisodeSpec(3, 0).k


def test_sequence_must_match_spec():
    with pytest.raises(ValueError):
        RewardSequence(EpisodeSpec(2, 1), (P, P, P))
    with pytest.raises(ValueError):
        RewardSequence(EpisodeSpec(2, 1), (P, N))


def test_outcome_invariants():
    with pytest.raises(ValueError):
        EpisodeOutcome(True)
    with pytest.raises(ValueError):
        EpisodeOutcome(False, 3)
    with pytest.raises(ValueError):
        EpisodeOutcome(True, 0)


def test_rule_parse():
    assert StoppingRule.parse("rule2-literal") is R2L
    with pytest.raises(ValueError, match="unknown rule"):
        StoppingRule.parse("rule3")
