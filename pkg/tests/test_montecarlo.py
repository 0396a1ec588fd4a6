import copy
import math
from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest

from termerr import closed_form as cf
from termerr.episode import EpisodeOutcome, EpisodeSpec, Population, StoppingRule, run_rule
from termerr.montecarlo import (
    ExperimentConfig,
    draw_arrangement,
    make_rng,
    run_experiment,
    run_test,
    simulate_batch,
    simulate_episode,
)
from termerr.oracle import arrangements, exact_probability

S = EpisodeSpec
R1, R2, R2L = StoppingRule.RULE_I, StoppingRule.RULE_II_FORGIVE, StoppingRule.RULE_II_LITERAL
ALL, FIRST_NEG = Population.ALL, Population.FIRST_NEGATIVE

# chi-square upper 0.1% points
CHI2_999 = {2: 13.816, 5: 20.515, 9: 27.877}


def test_episode_is_deterministic():
    a = [simulate_episode(S(9, 6), R1, make_rng(7, 0)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_forced_negative_draw():
    rng = make_rng(1, 0)
    for _ in range(50):
        assert simulate_episode(S(0, 1), R1, rng) == EpisodeOutcome(True, 1)


def test_scalar_episode_converges():
    rng = make_rng(3, 0)
    n = 100_000
    hits = sum(simulate_episode(S(2, 1), R1, rng).terminated_early for _ in range(n))
    assert abs(hits / n - 2 / 3) < 0.01


@pytest.mark.parametrize("population", [ALL, FIRST_NEG])
@pytest.mark.parametrize("rule", list(StoppingRule), ids=lambda r: r.value)
def test_early_exit_matches_full_arrangement(rule, population):
    spec = S(7, 5)
    for seed in range(200):
        rng = make_rng(seed, 0)
        twin = copy.deepcopy(rng)
        seq = draw_arrangement(spec, twin, population)
        assert sorted(seq) == sorted([0] * 5 + [1] * 7)
        assert simulate_episode(spec, rule, rng, population) == run_rule(seq, rule)


@pytest.mark.parametrize("population", [ALL, FIRST_NEG])
@pytest.mark.parametrize("rule", list(StoppingRule), ids=lambda r: r.value)
def test_batch_matches_run_rule(rule, population):
    spec = S(6, 4)
    batch = simulate_batch(spec, rule, 2000, make_rng(11, 0), population, record_steps=True)
    assert (batch.steps.sum(axis=1) == 6).all()
    for row, stop in zip(batch.steps, batch.stop_index):
        out = run_rule(tuple(int(v) for v in row), rule)
        assert (out.stop_index or 0) == stop


def test_batch_stop_indices_unaffected_by_recording():
    spec = S(30, 20)
    plain = simulate_batch(spec, R2, 3000, make_rng(5, 2))
    recorded = simulate_batch(spec, R2, 3000, make_rng(5, 2), record_steps=True)
    assert np.array_equal(plain.stop_index, recorded.stop_index)


def _chi2(counts: Counter, cells: int, n: int) -> float:
    expected = n / cells
    return sum((counts.get(c, 0) - expected) ** 2 / expected for c in range(cells))


@pytest.mark.parametrize("spec", [S(2, 1), S(3, 2), S(2, 2)])
def test_arrangements_uniform(spec):
    index = {seq: i for i, seq in enumerate(arrangements(spec))}
    n = 30_000
    batch = simulate_batch(spec, R1, n, make_rng(99, 0), record_steps=True)
    counts = Counter(index[tuple(int(v) for v in row)] for row in batch.steps)
    cells = len(index)
    assert _chi2(counts, cells, n) < CHI2_999[cells - 1]


def test_scalar_arrangements_uniform():
    spec = S(3, 2)
    index = {seq: i for i, seq in enumerate(arrangements(spec))}
    rng = make_rng(4, 4)
    n = 20_000
    counts = Counter(index[tuple(int(v) for v in draw_arrangement(spec, rng))] for _ in range(n))
    assert _chi2(counts, len(index), n) < CHI2_999[9]


def test_run_test_single_episode():
    cfg = ExperimentConfig(S(0, 1), R1, tests=1, episodes_per_test=1)
    assert run_test(cfg, 0).error == 1


@pytest.mark.parametrize(
    "spec, rule, population, target",
    [(S(90, 10), R1, ALL, 0.2), (S(45, 30), R2, FIRST_NEG, 0.7838)],
)
def test_run_test_full_size(spec, rule, population, target):
    cfg = ExperimentConfig(spec, rule, 1, 30_000, 2024, population)
    assert abs(float(run_test(cfg, 0).error) - target) < 0.01


def test_experiment_statistics():
    cfg = ExperimentConfig(S(80, 20), R1, tests=20, episodes_per_test=5000, master_seed=8)
    rep = run_experiment(cfg)
    assert len(rep.per_test_error) == 20
    assert all(0 <= e <= 1 for e in rep.per_test_error)
    assert rep.mean_error == float(sum(rep.per_test_error) / 20)
    assert rep.theory == F(2, 5) and rep.theory_source == "closed-form"
    assert rep.abs_error == abs(rep.mean_error - 0.4)
    se = math.sqrt(0.4 * 0.6 / (20 * 5000))
    assert rep.abs_error <= 5 * se
    # per-test spread should look binomial
    assert 0.5 * math.sqrt(0.24 / 5000) < rep.std_error < 2 * math.sqrt(0.24 / 5000)


def test_single_test_has_no_sample_std():
    rep = run_experiment(ExperimentConfig(S(4, 2), R1, tests=1, episodes_per_test=100, master_seed=1))
    assert rep.std_error is None
    assert rep.mean_error == float(rep.per_test_error[0])


def test_worker_count_does_not_change_report():
    cfg = ExperimentConfig(S(45, 30), R2L, tests=6, episodes_per_test=2000, master_seed=123)
    assert run_experiment(cfg, workers=1) == run_experiment(cfg, workers=3)


def test_tests_use_distinct_streams():
    cfg = ExperimentConfig(S(45, 30), R1, tests=5, episodes_per_test=500, master_seed=1)
    errors = run_experiment(cfg).per_test_error
    assert len(set(errors)) > 1


def test_theory_sources():
    assert run_experiment(ExperimentConfig(S(4, 2), R2L, 1, 10)).theory == F(7, 15)
    assert run_experiment(ExperimentConfig(S(4, 2), R2L, 1, 10)).theory_source == "path-count"
    assert run_experiment(ExperimentConfig(S(4, 2), R2L, 1, 10, population=FIRST_NEG)).theory == F(2, 5)
    assert run_experiment(ExperimentConfig(S(3, 3), R1, 1, 10)).theory == 1
    rep = run_experiment(ExperimentConfig(S(3, 3), R1, 1, 10), with_theory=False)
    assert rep.theory is None and rep.abs_error is None


def test_literal_variant_near_oracle():
    rep = run_experiment(ExperimentConfig(S(4, 2), R2L, tests=10, episodes_per_test=10_000, master_seed=2))
    assert abs(rep.mean_error - 7 / 15) < 0.01


def test_filter_sampling_scores_only_negative_openings():
    spec = S(90, 10)
    direct = run_experiment(ExperimentConfig(spec, R2, 20, 30_000, 5, FIRST_NEG, "direct"))
    filtered = run_experiment(ExperimentConfig(spec, R2, 20, 30_000, 5, FIRST_NEG, "filter"))
    # about 10% of 30,000 episodes open with a negative
    assert all(2600 < t.episodes < 3400 for t in filtered.per_test)
    assert all(t.episodes == 30_000 for t in direct.per_test)
    p = float(cf.p_rule2(spec))
    assert abs(filtered.mean_error - p) < 5 * math.sqrt(p * (1 - p) / 60_000)
    assert filtered.std_error > 2 * direct.std_error


def test_rule2_below_rule1_on_shared_streams():
    spec = S(20, 10)
    a = run_experiment(ExperimentConfig(spec, R1, 5, 4000, 77))
    b = run_experiment(ExperimentConfig(spec, R2, 5, 4000, 77))
    # same uniforms, and a forgiving rule only stops where Rule I already did
    assert all(x <= y for x, y in zip(b.per_test_error, a.per_test_error))


@pytest.mark.parametrize(
    "kwargs",
    [dict(tests=0), dict(episodes_per_test=0), dict(master_seed=-1), dict(master_seed=2**64), dict(sampling="x")],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(S(4, 2), R1, **kwargs)


def test_first_negative_population_needs_negatives():
    with pytest.raises(ValueError):
        ExperimentConfig(S(4, 0), R1, population=FIRST_NEG)
