"""Exit checks for the toolkit, one function per criterion.

Each check returns a :class:`CheckResult`; :func:`run_all` prints one
PASS/FAIL line per check. ``tests/test_acceptance.py`` drives the same
functions under pytest.
"""

from __future__ import annotations

import os
import random
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from . import closed_form as cf
from .closed_form import round_half_up
from .episode import EpisodeSpec, Population, StoppingRule
from .montecarlo import ExperimentConfig, run_experiment
from .oracle import brute_force_probability, exact_probability, population_size, reflection_check
from .report import SCENARIOS, admissible_specs, oracle_check

SEED = 20190101
MC_TOLERANCE = 0.005

TABLE1_P1 = ("0.8000", "0.4000", "0.2000", "0.1000", "0.1000", "0.0303")
TABLE1_P2 = ("0.7838", "0.3838", "0.1818", "0.0905", "0.0976", "0.0273")
TABLE1_DIFF = ("0.0162", "0.0162", "0.0182", "0.0095", "0.0024", "0.0030")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  [{self.seconds:.2f}s]  {self.detail}"


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    start = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, passed, detail, time.perf_counter() - start)


# 1 -------------------------------------------------------------------------


def check_theory_table() -> CheckResult:
    def run():
        start = time.perf_counter()
        p1 = tuple(round_half_up(cf.p_rule1(s)) for s in SCENARIOS)
        p2 = tuple(round_half_up(cf.p_rule2(s)) for s in SCENARIOS)
        diff = tuple(round_half_up(cf.reduction(s)) for s in SCENARIOS)
        elapsed = time.perf_counter() - start
        ok = p1 == TABLE1_P1 and p2 == TABLE1_P2 and diff == TABLE1_DIFF and elapsed < 1.0
        return ok, f"p={p1} p'={p2} p-p'={diff} in {elapsed:.4f}s"

    return _timed("1 theoretical table rows at 4 decimals", run)


# 2 -------------------------------------------------------------------------


@dataclass
class _McRun:
    rule1: dict
    rule2: dict
    rule2_all: dict


_MC_CACHE: dict[tuple[int, int, int], _McRun] = {}


def _mc(tests: int, episodes: int, seed: int) -> _McRun:
    key = (tests, episodes, seed)
    if key not in _MC_CACHE:
        workers = min(8, os.cpu_count() or 1)
        runs = {}
        for label, rule, population in (
            ("rule1", StoppingRule.RULE_I, Population.ALL),
            ("rule2", StoppingRule.RULE_II_FORGIVE, Population.FIRST_NEGATIVE),
            ("rule2_all", StoppingRule.RULE_II_FORGIVE, Population.ALL),
        ):
            runs[label] = {
                spec: run_experiment(
                    ExperimentConfig(spec, rule, tests, episodes, seed, population), workers=workers, with_theory=False
                ).mean_error
                for spec in SCENARIOS
            }
        _MC_CACHE[key] = _McRun(runs["rule1"], runs["rule2"], runs["rule2_all"])
    return _MC_CACHE[key]


def _within(means: dict, theory: Callable[[EpisodeSpec], Fraction]) -> tuple[bool, str]:
    worst = max(abs(means[s] - float(theory(s))) for s in SCENARIOS)
    cells = " ".join(f"{s.pos_count}/{s.neg_count}:{means[s]:.4f}" for s in SCENARIOS)
    return worst <= MC_TOLERANCE, f"max |mean - theory| = {worst:.4f} (tol {MC_TOLERANCE}); {cells}"


def check_mc_rule1(tests: int = 20, episodes: int = 30_000, seed: int = SEED) -> CheckResult:
    return _timed("2a Monte Carlo Rule I vs closed form", lambda: _within(_mc(tests, episodes, seed).rule1, cf.p_rule1))


def check_mc_rule2(tests: int = 20, episodes: int = 30_000, seed: int = SEED) -> CheckResult:
    return _timed(
        "2b Monte Carlo Rule II (first-negative episodes) vs closed form",
        lambda: _within(_mc(tests, episodes, seed).rule2, cf.p_rule2),
    )


def check_mc_ordering(tests: int = 20, episodes: int = 30_000, seed: int = SEED) -> CheckResult:
    def run():
        mc = _mc(tests, episodes, seed)
        gaps = {s: mc.rule1[s] - mc.rule2[s] for s in SCENARIOS}
        return all(g > 0 for g in gaps.values()), " ".join(f"{s.pos_count}/{s.neg_count}:{g:+.4f}" for s, g in gaps.items())

    return _timed("2c simulated Rule II mean below Rule I mean", run)


def check_mc_rule2_all_arrangements(tests: int = 20, episodes: int = 30_000, seed: int = SEED) -> CheckResult:
    """Forgive-first-negative rule scored over every arrangement, against the Rule II closed form."""
    return _timed(
        "2d Monte Carlo Rule II (all arrangements) vs closed form",
        lambda: _within(_mc(tests, episodes, seed).rule2_all, cf.p_rule2),
    )


# 3 -------------------------------------------------------------------------


def check_oracle_equivalence(max_total: int = 20) -> CheckResult:
    def run():
        start = time.perf_counter()
        mismatches = []
        for spec in admissible_specs(max_total):
            for rule in StoppingRule:
                for population in Population:
                    dp = exact_probability(spec, rule, population).value
                    bf = brute_force_probability(spec, rule, population).value
                    if dp != bf:
                        mismatches.append((spec.pos_count, spec.neg_count, rule.value, population.value, dp, bf))
        elapsed = time.perf_counter() - start
        return not mismatches and elapsed < 60, f"{len(mismatches)} mismatches in {elapsed:.1f}s"

    return _timed("3a enumeration = path count, all rules, totals <= 20", run)


def _closed_form_sweep(max_total, rule, population, formula) -> tuple[bool, str]:
    bad = []
    for spec in admissible_specs(max_total):
        got = exact_probability(spec, rule, population).value
        if got != formula(spec):
            bad.append(f"{spec.pos_count}/{spec.neg_count}: {got} != {formula(spec)}")
    specs = len(admissible_specs(max_total))
    return not bad, f"{specs - len(bad)}/{specs} specs agree" + (f"; first: {bad[:3]}" if bad else "")


def check_rule1_closed_form(max_total: int = 20) -> CheckResult:
    return _timed(
        "3b path count Rule I = 2x/(x+kx)",
        lambda: _closed_form_sweep(max_total, StoppingRule.RULE_I, Population.ALL, cf.p_rule1),
    )


def check_rule2_closed_form_first_negative(max_total: int = 20) -> CheckResult:
    def run():
        ok_f, d_f = _closed_form_sweep(max_total, StoppingRule.RULE_II_FORGIVE, Population.FIRST_NEGATIVE, cf.p_rule2)
        ok_l, d_l = _closed_form_sweep(max_total, StoppingRule.RULE_II_LITERAL, Population.FIRST_NEGATIVE, cf.p_rule2)
        return ok_f and ok_l, f"forgive: {d_f}; literal: {d_l}"

    return _timed("3c path count Rule II over first-negative episodes = 2(x-1)/(kx+x-1)", run)


def check_rule2_closed_form_all_arrangements(max_total: int = 20) -> CheckResult:
    return _timed(
        "3d path count Rule II forgiving, all arrangements = 2(x-1)/(kx+x-1)",
        lambda: _closed_form_sweep(max_total, StoppingRule.RULE_II_FORGIVE, Population.ALL, cf.p_rule2),
    )


# 4 -------------------------------------------------------------------------


def check_reflection(max_total: int = 60) -> CheckResult:
    def run():
        bad = []
        for spec in admissible_specs(max_total):
            a, b = reflection_check(spec)
            share = Fraction(population_size(spec, Population.FIRST_NEGATIVE), population_size(spec))
            if a != b or share != Fraction(spec.neg_count, spec.total):
                bad.append((spec.pos_count, spec.neg_count, a, b))
        n = len(admissible_specs(max_total))
        return not bad, f"{n - len(bad)}/{n} specs with A = B and opening-negative share x/(kx+x)"

    return _timed("4 reflection identity, totals <= 60", run)


# 5 -------------------------------------------------------------------------


def check_identities(samples: int = 1000, seed: int = SEED) -> CheckResult:
    def run():
        rng = random.Random(seed)
        failures = 0
        for _ in range(samples):
            x = rng.randint(1, 500)
            r = rng.randint(1, 5000)
            spec = EpisodeSpec.from_margin(x, r)
            red = cf.reduction(spec)
            red_m = cf.reduction_margin(x, r)
            if red != cf.p_rule1(spec) - cf.p_rule2(spec):
                failures += 1
            elif red_m != cf.p_rule1_margin(x, r) - cf.p_rule2_margin(x, r):
                failures += 1
            elif not (red > 0 and red_m > 0):
                failures += 1
        return failures == 0, f"{samples - failures}/{samples} random (x, r) satisfy both identities with positive reduction"

    return _timed("5 reduction identities, exact", run)


# 6 -------------------------------------------------------------------------


def check_bounds() -> CheckResult:
    def run():
        worked = (
            cf.min_k_for_error_bound(Fraction(1, 5)) == 9
            and cf.min_margin_ratio_for_bound(Fraction(1, 5)) == 8
            and cf.min_margin_ratio_for_bound(Fraction(1, 2)) == 2
        )
        grid = [Fraction(i, 100) for i in range(1, 100)]
        round_trip = all(cf.p_rule1_of_k(cf.min_k_for_error_bound(m)) == m for m in grid)
        ratio_trip = all(cf.p_rule1_of_margin_ratio(cf.min_margin_ratio_for_bound(m)) == m for m in grid)
        return worked and round_trip and ratio_trip, f"worked examples {worked}, k round trip {round_trip}, r/x round trip {ratio_trip} over {len(grid)} bounds"

    return _timed("6 bound solvers", run)


# 7 -------------------------------------------------------------------------


def check_scale_invariance() -> CheckResult:
    def run():
        a, b = EpisodeSpec(190, 10), EpisodeSpec(760, 40)
        same_p = cf.p_rule1(a) == cf.p_rule1(b) == Fraction(1, 10)
        diff_p2 = cf.p_rule2(a) != cf.p_rule2(b)
        shown = (round_half_up(cf.p_rule2(a)), round_half_up(cf.p_rule2(b)))
        return same_p and diff_p2 and shown == ("0.0905", "0.0976"), f"p equal {same_p}, p' = {shown}"

    return _timed("7 scale invariance of Rule I only", run)


# 8 -------------------------------------------------------------------------


def check_determinism(tests: int = 20, episodes: int = 2_000, seed: int = SEED) -> CheckResult:
    from .cli import main

    def run():
        blobs = []
        with tempfile.TemporaryDirectory() as tmp:
            for i, workers in enumerate((1, 1, 4)):
                for fmt in ("csv", "json"):
                    path = os.path.join(tmp, f"t{i}.{fmt}")
                    code = main(
                        ["table1", "--seed", str(seed), "--tests", str(tests), "--episodes", str(episodes),
                         "--workers", str(workers), "--format", fmt, "--out", path]
                    )
                    if code != 0:
                        return False, f"table1 exited {code}"
                    with open(path, "rb") as fh:
                        blobs.append((fmt, fh.read()))
        csvs = {b for f, b in blobs if f == "csv"}
        jsons = {b for f, b in blobs if f == "json"}
        return len(csvs) == 1 and len(jsons) == 1, f"{len(csvs)} distinct CSV, {len(jsons)} distinct JSON over 3 runs (workers 1, 1, 4)"

    return _timed("8 table1 byte-identical across runs and worker counts", run)


# 9 -------------------------------------------------------------------------


def check_ambiguity_report() -> CheckResult:
    def run():
        report = oracle_check(6)
        hits = [
            n for n in report.notes
            if n.spec == EpisodeSpec(4, 2) and n.check.startswith(StoppingRule.RULE_II_LITERAL.value + "/all")
        ]
        text = report.text()
        ok = (
            len(hits) == 1
            and hits[0].observed == Fraction(7, 15)
            and hits[0].expected == Fraction(2, 5)
            and not hits[0].ok
            and "7/15" in text
            and report.ok
        )
        return ok, hits[0].line() if hits else "literal row for 4/2 missing"

    return _timed("9 oracle report flags literal Rule II 7/15 vs 2/5", run)


def run_all(*, quick: bool = False, echo: bool = False) -> list[CheckResult]:
    checks: list[Callable[[], CheckResult]] = [
        check_theory_table,
        check_oracle_equivalence,
        check_rule1_closed_form,
        check_rule2_closed_form_first_negative,
        check_rule2_closed_form_all_arrangements,
        check_reflection,
        check_identities,
        check_bounds,
        check_scale_invariance,
        check_ambiguity_report,
    ]
    if not quick:
        checks[1:1] = [check_mc_rule1, check_mc_rule2, check_mc_ordering, check_mc_rule2_all_arrangements]
        checks.append(check_determinism)
    results = []
    for check in checks:
        result = check()
        if echo:
            print(result.line(), flush=True)
        results.append(result)
    return results
