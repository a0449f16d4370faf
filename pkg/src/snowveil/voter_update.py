"""A single unlocked voter's gamma-round sampling procedure."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional

import numpy as np

from .chb import ChbParams, chb_winners
from .preferences import ParameterError

if TYPE_CHECKING:
    from .protocol import SystemState


@dataclass(frozen=True)
class UpdateParams:
    """Sample size ``k``, rounds ``gamma``, early-exit wins ``tau_max``, minimum wins ``tau_min``."""

    k: int = 10
    gamma: int = 10
    tau_max: int = 6
    tau_min: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not 1 <= self.tau_min <= self.tau_max <= self.gamma:
            raise ParameterError(
                f"need 1 <= tau_min <= tau_max <= gamma, got "
                f"tau_min={self.tau_min}, tau_max={self.tau_max}, gamma={self.gamma}"
            )

    @classmethod
    def coupled(cls, k: int = 10, gamma: int = 10, tau_min: int = 3) -> "UpdateParams":
        """Recommended coupling ``tau_max = gamma // 2 + 1``; ``tau_min`` is capped at ``tau_max``."""
        tau_max = gamma // 2 + 1
        return cls(k=k, gamma=gamma, tau_max=tau_max, tau_min=min(tau_min, tau_max))


@dataclass(frozen=True)
class UpdateOutcome:
    """Result of one voter update.  ``candidate`` is ``None`` for NO-LOCK."""

    candidate: Optional[int]
    rounds_used: int
    win_counts: tuple[int, ...]
    last_win_round: tuple[Optional[int], ...]

    @property
    def locked(self) -> bool:
        return self.candidate is not None


def tally_rounds(winners: Iterable[int], m: int, params: UpdateParams) -> UpdateOutcome:
    """Run the lock/no-lock state machine over a stream of round winners.

    Consumes at most ``gamma`` winners and stops early as soon as one
    candidate reaches ``tau_max`` wins.  Feeding a scripted sequence here
    bypasses sampling entirely.
    """
    counts = [0] * m
    last: list[Optional[int]] = [None] * m
    r = 0
    for r, w in enumerate(itertools.islice(winners, params.gamma), start=1):
        counts[w] += 1
        last[w] = r
        if counts[w] >= params.tau_max:
            return UpdateOutcome(int(w), r, tuple(counts), tuple(last))
    if r < params.gamma:
        raise ParameterError(f"winner stream ended after {r} of {params.gamma} rounds")
    best = max(counts)
    if best < params.tau_min:
        return UpdateOutcome(None, r, tuple(counts), tuple(last))
    tied = [c for c in range(m) if counts[c] == best]
    # every tied candidate has won at least once, so last[c] is set
    pick = max(tied, key=lambda c: last[c])
    return UpdateOutcome(pick, r, tuple(counts), tuple(last))


def sample_voters(excluding: int, k: int, n: int, rng: np.random.Generator, rounds: Optional[int] = None) -> np.ndarray:
    """Uniform ``k``-subsets of ``{0..n-1} \\ {excluding}``, without replacement.

    With ``rounds`` set, returns a ``(rounds, k)`` array of independent draws;
    otherwise a single length-``k`` array.
    """
    if k > n - 1:
        raise ParameterError(f"cannot sample k={k} voters from the other {n - 1}")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    shape = (1 if rounds is None else rounds, n - 1)
    keys = rng.random(shape)
    if k < n - 1:
        picks = keys.argpartition(k - 1, axis=1)[:, :k]
    else:
        picks = np.broadcast_to(np.arange(n - 1), (shape[0], n - 1)).copy()
    picks = picks + (picks >= excluding)
    return picks[0] if rounds is None else picks


def update_voter(voter: int, state: "SystemState", params: UpdateParams, chb: ChbParams, rng: np.random.Generator) -> UpdateOutcome:
    """Sample, aggregate and tally for one unlocked voter.

    Every round draws a fresh sample of ``k`` other voters, scores their
    effective ballots under the current lock state and records the CHB
    winner.  All ``gamma`` samples are drawn up front; rounds after an early
    exit are discarded.
    """
    if state.locked_on(voter) is not None:
        raise ParameterError(f"voter {voter} is already locked")
    n, a = state.n, state.m
    if a == 1:
        return tally_rounds([0] * params.gamma, 1, params)
    idx = sample_voters(voter, params.k, n, rng, rounds=params.gamma)
    borda2 = state.effective_borda2[idx].sum(axis=1)
    first = state.effective_first[idx].sum(axis=1)
    winners = chb_winners(borda2, first, params.k, chb)
    return tally_rounds(winners.tolist(), a, params)
