"""Decentralised preference discovery by repeated sampling, locking and elimination."""

from .chb import ChbParams, ScoreTable, chb_winner, hybrid_score, min_hybrid_delta, score_sample
from .preferences import (
    AbstractBallot,
    BallotMode,
    FullBallot,
    ParameterError,
    Profile,
    ProfileError,
    canonical_winner,
    effective_ballot,
    generate_impartial_culture,
    generate_polarised,
)
from .protocol import (
    NonConvergenceError,
    ProtocolParams,
    SystemState,
    run_full_ranking,
    run_single_winner,
)
from .voter_update import UpdateOutcome, UpdateParams, sample_voters, tally_rounds, update_voter

__version__ = "0.1.0"
