"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or domain error,
3 output could not be written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import closed_form as cf
from .closed_form import DomainError, as_fraction, round_half_up
from .episode import EpisodeSpec, Population, StoppingRule
from .montecarlo import DEFAULT_EPISODES, DEFAULT_TESTS, SAMPLING_MODES, ExperimentConfig, run_experiment
from .oracle import CapExceeded
from . import report as rp

SEED_ENV = "TERMERR_SEED"
DEFAULT_SEED = 20190101

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _rational(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed_default() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", metavar="PATH", help="write here instead of stdout")


def _add_spec(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pos", type=int)
    p.add_argument("--neg", type=int)
    p.add_argument("--k", type=_rational, help="positives per negative (with --neg)")
    p.add_argument("--r", type=int, help="rewards margin pos - neg (with --neg)")


def _add_sim(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tests", type=int, default=DEFAULT_TESTS)
    p.add_argument("--episodes", type=int, default=DEFAULT_EPISODES)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--sampling", choices=SAMPLING_MODES, default="direct")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="termerr", description="Premature-termination error toolkit.")
    parser.add_argument("--config", metavar="JSON", help="JSON file of flag defaults; flags on the command line win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="closed-form errors for one episode composition")
    _add_spec(p)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("bounds", help="minimum k and r/x for an error bound M")
    p.add_argument("M", type=_rational)

    p = sub.add_parser("simulate", help="Monte Carlo experiment for one composition and rule")
    _add_spec(p)
    p.add_argument("--rule", choices=[r.value for r in StoppingRule], default=StoppingRule.RULE_I.value)
    p.add_argument("--population", choices=[x.value for x in Population], default=Population.ALL.value)
    _add_sim(p)
    _add_output(p)

    p = sub.add_parser("table1", help="reproduce the six-scenario simulation table")
    _add_sim(p)
    p.add_argument("--rule2", choices=["rule2", "rule2-literal"], default="rule2")
    p.add_argument(
        "--rule2-population", choices=[x.value for x in Population], default=Population.FIRST_NEGATIVE.value
    )
    _add_output(p)

    p = sub.add_parser("sweep", help="plot-ready closed-form sweeps")
    p.add_argument("mode", choices=rp.SWEEP_MODES)
    p.add_argument("--start", type=_rational, required=True)
    p.add_argument("--stop", type=_rational, required=True)
    p.add_argument("--step", type=_rational, required=True)
    p.add_argument("--x", type=int, action="append", default=[], help="negative count (margin-x mode, repeatable)")
    _add_output(p)

    p = sub.add_parser("oracle", help="cross-check closed forms, path counts and enumeration")
    p.add_argument("--max-total", type=int, default=20)
    p.add_argument("--brute-max", type=int, default=20)
    p.add_argument("--rules", default=",".join(r.value for r in StoppingRule))
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("check", help="run the acceptance checks")
    p.add_argument("--quick", action="store_true", help="skip the full-size Monte Carlo checks")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(values, dict):
        raise UsageError("config file must hold a JSON object")
    defaults = {key.replace("-", "_"): value for key, value in values.items()}
    for action in parser._subparsers._group_actions:  # type: ignore[union-attr]
        for subparser in action.choices.values():
            subparser.set_defaults(**defaults)


def resolve_spec(args: argparse.Namespace) -> EpisodeSpec:
    given = {name for name in ("pos", "k", "r") if getattr(args, name, None) is not None}
    if args.neg is None:
        raise UsageError("--neg is required")
    if len(given) != 1:
        raise UsageError("give exactly one of --pos, --k, --r together with --neg")
    try:
        if "pos" in given:
            return EpisodeSpec(args.pos, args.neg)
        if "k" in given:
            return EpisodeSpec.from_k(args.neg, args.k)
        return EpisodeSpec.from_margin(args.neg, args.r)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_theory(args) -> int:
    spec = resolve_spec(args)
    rep = cf.theory_report(spec)
    if args.format == "json":
        print(
            json.dumps(
                {
                    "pos": spec.pos_count,
                    "neg": spec.neg_count,
                    "k": rp.exact_str(rep.k),
                    "r": rep.margin,
                    "r_over_x": rp.exact_str(rep.margin_ratio),
                    "p_rule1": rp.exact_str(rep.p_rule1),
                    "p_rule2": rp.exact_str(rep.p_rule2),
                    "reduction": rp.exact_str(rep.reduction),
                },
                indent=2,
            )
        )
        return EXIT_OK
    print(f"pos = {spec.pos_count}, neg = {spec.neg_count}, k = {rep.k}, r = {rep.margin}, r/x = {rep.margin_ratio}")
    for label, value in (("p", rep.p_rule1), ("p'", rep.p_rule2), ("p - p'", rep.reduction)):
        print(f"{label} = {round_half_up(value)}  ({rp.exact_str(value)})")
    return EXIT_OK


def cmd_bounds(args) -> int:
    bound = cf.ErrorBound(args.M)
    k = cf.min_k_for_error_bound(bound)
    ratio = cf.min_margin_ratio_for_bound(bound)
    print(f"M = {bound.M}: k >= {k} ({round_half_up(k)}), r/x >= {ratio} ({round_half_up(ratio)})")
    return EXIT_OK


def _seed(args) -> int:
    return _seed_default() if args.seed is None else args.seed


def cmd_simulate(args) -> int:
    spec = resolve_spec(args)
    try:
        config = ExperimentConfig(
            spec,
            StoppingRule.parse(args.rule),
            args.tests,
            args.episodes,
            _seed(args),
            Population.parse(args.population),
            args.sampling,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = run_experiment(config, workers=args.workers)
    text = rp.simulation_json(report) if args.format == "json" else rp.simulation_csv(report)
    _emit(text, args.out)
    theory = "n/a" if report.theory is None else f"{round_half_up(report.theory)} [{report.theory_source}]"
    err = "n/a" if report.theory is None else round_half_up(abs(report.mean_exact - report.theory))
    std = "n/a" if report.std_error is None else round_half_up(report.std_error)
    summary = f"mean={round_half_up(report.mean_exact)} std={std} theory={theory} abs_err={err}"
    print(summary, file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def cmd_table1(args) -> int:
    try:
        records = rp.table1(
            _seed(args),
            tests=args.tests,
            episodes=args.episodes,
            workers=args.workers,
            rule2=StoppingRule.parse(args.rule2),
            rule2_population=Population.parse(args.rule2_population),
            sampling=args.sampling,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "json":
        text = rp.records_to_json(
            records, seed=_seed(args), tests=args.tests, episodes_per_test=args.episodes, sampling=args.sampling
        )
    else:
        text = rp.records_to_csv(records)
    _emit(text, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        header, rows = rp.sweep(args.mode, args.start, args.stop, args.step, args.x)
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc)) from None
    _emit(rp.sweep_json(header, rows) if args.format == "json" else rp.sweep_csv(header, rows), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        rules = [StoppingRule.parse(r.strip()) for r in args.rules.split(",") if r.strip()]
        result = rp.oracle_check(args.max_total, rules, brute_max=min(args.brute_max, args.max_total))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(result.to_json() if args.format == "json" else result.text(), args.out)
    return EXIT_OK if result.ok else EXIT_VERIFY


def cmd_check(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=args.quick, echo=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "theory": cmd_theory,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "check": cmd_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"termerr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError, CapExceeded) as exc:
        print(f"termerr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"termerr: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
