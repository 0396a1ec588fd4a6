"""Premature-termination error of threshold stopping rules on fixed-composition reward sequences."""

from .closed_form import (
    DomainError,
    ErrorBound,
    TheoryReport,
    min_k_for_error_bound,
    min_margin_ratio_for_bound,
    p_rule1,
    p_rule1_margin,
    p_rule2,
    p_rule2_margin,
    reduction,
    reduction_margin,
    theory_report,
)
from .episode import EpisodeOutcome, EpisodeSpec, Population, Reward, RewardSequence, StoppingRule, run_rule
from .montecarlo import ExperimentConfig, ExperimentReport, run_experiment, run_test, simulate_episode
from .oracle import (
    CapExceeded,
    ExactProbability,
    PathCount,
    brute_force_probability,
    count_paths,
    exact_probability,
    reflection_check,
)

__version__ = "0.1.0"
