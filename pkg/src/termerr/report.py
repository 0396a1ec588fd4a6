"""Table-style records, sweeps and the oracle cross-check, with CSV/JSON writers."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from . import closed_form as cf
from .closed_form import as_fraction, round_half_up
from .episode import EpisodeSpec, Population, StoppingRule
from .montecarlo import ExperimentConfig, ExperimentReport, run_experiment
from .oracle import (
    BRUTE_FORCE_CAP,
    DEFAULT_DP_CAP,
    CapExceeded,
    brute_force_probability,
    exact_probability,
    population_size,
    reflection_check,
)

PLACES = 4

SCENARIOS: tuple[EpisodeSpec, ...] = (
    EpisodeSpec(45, 30),
    EpisodeSpec(80, 20),
    EpisodeSpec(90, 10),
    EpisodeSpec(190, 10),
    EpisodeSpec(760, 40),
    EpisodeSpec(650, 10),
)

DIFF_RULE = "rule1-minus-rule2"

TABLE1_COLUMNS = (
    "scenario",
    "pos",
    "neg",
    "k",
    "r",
    "r_over_x",
    "rule",
    "population",
    "theory",
    "sim_mean",
    "sim_std",
    "abs_err",
)


def fmt(value: "Fraction | float | int | None") -> str:
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return round_half_up(as_fraction(value), PLACES)


def exact_str(value: Optional[Fraction]) -> Optional[str]:
    return None if value is None else f"{value.numerator}/{value.denominator}"


def _json_number(value: "Fraction | float | None") -> Optional[dict]:
    if value is None:
        return None
    if isinstance(value, Fraction):
        return {"exact": exact_str(value), "float": float(value)}
    return {"float": value}


@dataclass(frozen=True)
class OutputRecord:
    """One row of the simulation table."""

    scenario: str
    pos: int
    neg: int
    k: Fraction
    r: int
    r_over_x: Fraction
    rule: str
    population: str
    theory: Optional[Fraction]
    sim_mean: Optional[Fraction]
    sim_std: Optional[float] = None
    abs_err: Optional[Fraction] = None

    def csv_row(self) -> list[str]:
        return [
            self.scenario,
            str(self.pos),
            str(self.neg),
            fmt(self.k),
            str(self.r),
            fmt(self.r_over_x),
            self.rule,
            self.population,
            fmt(self.theory),
            fmt(self.sim_mean),
            fmt(self.sim_std),
            fmt(self.abs_err),
        ]

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "pos": self.pos,
            "neg": self.neg,
            "k": _json_number(self.k),
            "r": self.r,
            "r_over_x": _json_number(self.r_over_x),
            "rule": self.rule,
            "population": self.population,
            "theory": _json_number(self.theory),
            "sim_mean": _json_number(self.sim_mean),
            "sim_std": _json_number(self.sim_std),
            "abs_err": _json_number(self.abs_err),
        }


def record_from_report(report: ExperimentReport, scenario: Optional[str] = None) -> OutputRecord:
    spec = report.config.spec
    mean = report.mean_exact
    return OutputRecord(
        scenario=scenario or str(spec),
        pos=spec.pos_count,
        neg=spec.neg_count,
        k=spec.k,
        r=spec.margin,
        r_over_x=spec.margin_ratio,
        rule=report.config.rule.value,
        population=report.config.population.value,
        theory=report.theory,
        sim_mean=mean,
        sim_std=report.std_error,
        abs_err=None if report.theory is None else abs(mean - report.theory),
    )


def difference_record(first: OutputRecord, second: OutputRecord) -> OutputRecord:
    theory = None if first.theory is None or second.theory is None else first.theory - second.theory
    sim = first.sim_mean - second.sim_mean if first.sim_mean is not None and second.sim_mean is not None else None
    return OutputRecord(
        scenario=first.scenario,
        pos=first.pos,
        neg=first.neg,
        k=first.k,
        r=first.r,
        r_over_x=first.r_over_x,
        rule=DIFF_RULE,
        population=f"{first.population}|{second.population}",
        theory=theory,
        sim_mean=sim,
        abs_err=None if theory is None or sim is None else abs(theory - sim),
    )


def table1(
    seed: int,
    *,
    tests: int = 20,
    episodes: int = 30_000,
    workers: int = 1,
    rule2: StoppingRule = StoppingRule.RULE_II_FORGIVE,
    rule2_population: Population = Population.FIRST_NEGATIVE,
    sampling: str = "direct",
    scenarios: Sequence[EpisodeSpec] = SCENARIOS,
) -> list[OutputRecord]:
    """Rule I, Rule II and their difference for every scenario, in that order."""
    records: list[OutputRecord] = []
    for spec in scenarios:
        first = record_from_report(
            run_experiment(ExperimentConfig(spec, StoppingRule.RULE_I, tests, episodes, seed), workers=workers)
        )
        second = record_from_report(
            run_experiment(
                ExperimentConfig(spec, rule2, tests, episodes, seed, rule2_population, sampling), workers=workers
            )
        )
        records += [first, second, difference_record(first, second)]
    return records


def records_to_csv(records: Iterable[OutputRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE1_COLUMNS)
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue()


def records_to_json(records: Iterable[OutputRecord], **meta) -> str:
    payload = dict(meta)
    payload["std_convention"] = "sample (ddof=1)"
    payload["records"] = [r.to_json() for r in records]
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def parse_records_csv(text: str) -> list[OutputRecord]:
    """Inverse of :func:`records_to_csv` at the CSV's 4-decimal precision."""

    def num(s: str) -> Optional[Fraction]:
        return Fraction(s) if s else None

    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TABLE1_COLUMNS:
        raise ValueError("unexpected CSV header")
    out = []
    for row in rows[1:]:
        d = dict(zip(TABLE1_COLUMNS, row))
        std = num(d["sim_std"])
        out.append(
            OutputRecord(
                scenario=d["scenario"],
                pos=int(d["pos"]),
                neg=int(d["neg"]),
                k=Fraction(d["k"]),
                r=int(d["r"]),
                r_over_x=Fraction(d["r_over_x"]),
                rule=d["rule"],
                population=d["population"],
                theory=num(d["theory"]),
                sim_mean=num(d["sim_mean"]),
                sim_std=None if std is None else float(std),
                abs_err=num(d["abs_err"]),
            )
        )
    return out


# -- simulate -----------------------------------------------------------------

SIMULATE_COLUMNS = ("row", "pos", "neg", "rule", "population", "episodes", "failures", "error", "std", "theory", "abs_err")


def simulation_rows(report: ExperimentReport) -> list[list[str]]:
    cfg = report.config
    head = [str(cfg.spec.pos_count), str(cfg.spec.neg_count), cfg.rule.value, cfg.population.value]
    rows = []
    for i, t in enumerate(report.per_test):
        rows.append([str(i)] + head + [str(t.episodes), str(t.failures), fmt(t.error), "", "", ""])
    mean = report.mean_exact
    rows.append(
        ["aggregate"]
        + head
        + [
            str(sum(t.episodes for t in report.per_test)),
            str(sum(t.failures for t in report.per_test)),
            fmt(mean),
            fmt(report.std_error),
            fmt(report.theory),
            fmt(None if report.theory is None else abs(mean - report.theory)),
        ]
    )
    return rows


def simulation_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SIMULATE_COLUMNS)
    writer.writerows(simulation_rows(report))
    return buf.getvalue()


def simulation_json(report: ExperimentReport) -> str:
    cfg = report.config
    mean = report.mean_exact
    payload = {
        "pos": cfg.spec.pos_count,
        "neg": cfg.spec.neg_count,
        "rule": cfg.rule.value,
        "population": cfg.population.value,
        "sampling": cfg.sampling,
        "tests": cfg.tests,
        "episodes_per_test": cfg.episodes_per_test,
        "master_seed": cfg.master_seed,
        "std_convention": "sample (ddof=1)",
        "per_test": [
            {"failures": t.failures, "episodes": t.episodes, "error": _json_number(t.error)} for t in report.per_test
        ],
        "mean_error": _json_number(mean),
        "std_error": _json_number(report.std_error),
        "theory": _json_number(report.theory),
        "theory_source": report.theory_source,
        "abs_error": _json_number(None if report.theory is None else abs(mean - report.theory)),
    }
    return json.dumps(payload, indent=2) + "\n"


# -- sweeps ---------------------------------------------------------------------

SWEEP_MODES = ("k", "margin", "bound", "margin-x")


def frange(start: Fraction, stop: Fraction, step: Fraction) -> list[Fraction]:
    """Inclusive exact range ``start, start + step, ..., <= stop``."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if start > stop:
        raise ValueError(f"empty range: start {start} > stop {stop}")
    out = []
    v = start
    while v <= stop:
        out.append(v)
        v += step
    return out


def sweep(mode: str, start, stop, step, xs: Sequence[int] = ()) -> tuple[tuple[str, ...], list[tuple]]:
    """Plot-ready rows for one sweep mode; values outside a formula's open domain are skipped."""
    grid = frange(as_fraction(start), as_fraction(stop), as_fraction(step))
    if mode == "k":
        return ("k", "p"), [(k, cf.p_rule1_of_k(k)) for k in grid if k > 1]
    if mode == "margin":
        return ("r_over_x", "p"), [(m, cf.p_rule1_of_margin_ratio(m)) for m in grid if m > 0]
    if mode == "bound":
        rows = [(m, cf.min_k_for_error_bound(m), cf.min_margin_ratio_for_bound(m)) for m in grid if 0 < m < 1]
        return ("M", "min_k", "min_r_over_x"), rows
    if mode == "margin-x":
        if not xs:
            raise ValueError("margin-x sweep needs at least one x")
        if any(x < 1 for x in xs):
            raise ValueError("x values must be >= 1")
        rows = [(x, m, x * cf.min_margin_ratio_for_bound(m)) for x in xs for m in grid if 0 < m < 1]
        return ("x", "p", "r"), rows
    raise ValueError(f"unknown sweep mode {mode!r}; expected one of {', '.join(SWEEP_MODES)}")


def sweep_csv(header: Sequence[str], rows: Iterable[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def sweep_json(header: Sequence[str], rows: Iterable[tuple]) -> str:
    return json.dumps([{h: _json_number(v) if isinstance(v, Fraction) else v for h, v in zip(header, row)} for row in rows], indent=2) + "\n"


# -- oracle cross-check -----------------------------------------------------------


@dataclass
class OracleFinding:
    spec: EpisodeSpec
    check: str
    expected: Optional[Fraction]
    observed: Optional[Fraction]
    ok: bool
    note: str = ""

    informational: bool = False

    def line(self) -> str:
        if self.informational:
            status = "same" if self.ok else "differs"
        else:
            status = "ok" if self.ok else "MISMATCH"
        exp = "" if self.expected is None else f" expected {exact_str(self.expected)}"
        obs = "" if self.observed is None else f" got {exact_str(self.observed)}"
        note = f" ({self.note})" if self.note else ""
        return f"[{status}] pos={self.spec.pos_count} neg={self.spec.neg_count} {self.check}:{obs}{exp}{note}"


@dataclass
class OracleReport:
    max_total: int
    brute_max: int
    rules: tuple[StoppingRule, ...]
    specs_checked: int = 0
    findings: list[OracleFinding] = field(default_factory=list)
    notes: list[OracleFinding] = field(default_factory=list)

    @property
    def discrepancies(self) -> list[OracleFinding]:
        return [f for f in self.findings if not f.ok]

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def text(self) -> str:
        lines = [
            f"oracle cross-check: totals <= {self.max_total}, enumeration <= {self.brute_max}, "
            f"rules {', '.join(r.value for r in self.rules)}",
            f"admissible specs checked: {self.specs_checked}",
            f"checks run: {len(self.findings)}, discrepancies: {len(self.discrepancies)}",
        ]
        lines += [f.line() for f in self.discrepancies]
        if self.notes:
            lines.append("rules without a matching closed form (informational):")
            lines += [n.line() for n in self.notes]
        lines.append("PASS" if self.ok else "FAIL")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        def enc(f: OracleFinding) -> dict:
            return {
                "pos": f.spec.pos_count,
                "neg": f.spec.neg_count,
                "check": f.check,
                "expected": exact_str(f.expected),
                "observed": exact_str(f.observed),
                "ok": f.ok,
                "note": f.note,
            }

        return json.dumps(
            {
                "max_total": self.max_total,
                "brute_max": self.brute_max,
                "rules": [r.value for r in self.rules],
                "specs_checked": self.specs_checked,
                "checks": len(self.findings),
                "discrepancies": [enc(f) for f in self.discrepancies],
                "notes": [enc(n) for n in self.notes],
                "ok": self.ok,
            },
            indent=2,
        ) + "\n"


def admissible_specs(max_total: int) -> list[EpisodeSpec]:
    return [EpisodeSpec(p, n) for total in range(3, max_total + 1) for n in range(1, total) if (p := total - n) > n]


def oracle_check(
    max_total: int,
    rules: Sequence[StoppingRule] = tuple(StoppingRule),
    *,
    brute_max: int = 20,
    dp_cap: int = DEFAULT_DP_CAP,
) -> OracleReport:
    """Closed form vs path counting vs enumeration on every admissible spec up to ``max_total``.

    Rule II variants are compared with their closed form over first-negative
    arrangements. Their unconditioned probabilities have no closed form and
    are listed as notes, flagged when they differ from it.
    """
    if max_total > dp_cap:
        raise CapExceeded(f"max_total {max_total} exceeds the path-counting cap of {dp_cap}")
    if brute_max > BRUTE_FORCE_CAP:
        raise CapExceeded(f"enumeration limit {brute_max} exceeds the cap of {BRUTE_FORCE_CAP}")
    rules = tuple(StoppingRule.parse(r) for r in rules)
    report = OracleReport(max_total, brute_max, rules)

    def add(spec, check, expected, observed, note=""):
        report.findings.append(OracleFinding(spec, check, expected, observed, expected == observed, note))

    for spec in admissible_specs(max_total):
        report.specs_checked += 1
        p1, p2 = cf.p_rule1(spec), cf.p_rule2(spec)
        opening_negative = Fraction(population_size(spec, Population.FIRST_NEGATIVE), population_size(spec))
        add(spec, "opening-negative share", Fraction(spec.neg_count, spec.total), opening_negative)
        a, b = reflection_check(spec, cap=dp_cap)
        add(spec, "reflection up-first touching vs down-first", Fraction(b), Fraction(a))

        for rule in rules:
            for population in Population:
                dp = exact_probability(spec, rule, population, cap=dp_cap).value
                label = f"{rule.value}/{population.value}"
                if spec.total <= brute_max:
                    add(spec, f"{label} enumeration vs path count", dp, brute_force_probability(spec, rule, population).value)
                if rule is StoppingRule.RULE_I and population is Population.ALL:
                    add(spec, f"{label} path count vs closed form", p1, dp)
                elif rule is not StoppingRule.RULE_I and population is Population.FIRST_NEGATIVE:
                    add(spec, f"{label} path count vs closed form", p2, dp)
                elif rule is not StoppingRule.RULE_I and population is Population.ALL:
                    src = "enumeration" if spec.total <= brute_max else "path count"
                    flag = "differs from the Rule II closed form" if dp != p2 else "equals the Rule II closed form"
                    report.notes.append(
                        OracleFinding(spec, f"{label} no closed form; {src} {exact_str(dp)}", p2, dp, dp == p2, flag, True)
                    )
    return report
