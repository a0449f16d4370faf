"""Axiom oracles, the burying adversary and concentration bounds."""

from .adversary import (
    CoalitionScenario,
    adversary_sweep,
    bury,
    expected_sample_margin,
    margin_electorate,
    minimal_coalition,
    per_voter_margin,
    run_adversary_trial,
)
from .axioms import (
    ConstructionError,
    Improvement,
    ImprovementKind,
    PreconditionError,
    TippingCase,
    apply_improvement,
    build_pr_tipping_profile,
    check_monotonicity,
    run_axiom_suite,
)
from .bounds import FailureBoundInputs, block_electorate, failure_probability_bound, misleading_sample_rate
