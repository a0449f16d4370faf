"""Single-winner consensus loop and full-ranking assembly.

One rank-round starts with every voter unlocked.  Each time step activates one
uniformly random unlocked voter, runs its update, and applies a lock if one
results.  The round ends when some candidate holds ``ceil(Q * n)`` locks.
Time is counted in update calls, NO-LOCK outcomes included.

If every voter ends up locked without any candidate reaching the quorum, a
stall is recorded and all voters are unlocked again; activations keep
counting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ._rational import as_fraction, ceil_times
from .chb import ChbParams
from .preferences import BallotMode, ParameterError, Profile, borda_matrix
from .voter_update import UpdateOutcome, UpdateParams, update_voter

log = logging.getLogger(__name__)

UNLOCKED = -1


class NonConvergenceError(RuntimeError):
    """A rank-round hit its activation cap before reaching quorum."""

    def __init__(self, message: str, activations: int, trace: "PotentialTrace", stalls: int):
        super().__init__(message)
        self.activations = activations
        self.trace = trace
        self.stalls = stalls


class QuorumViolation(AssertionError):
    """Two candidates met the quorum at once; impossible when ``Q > 1/2``."""


@dataclass(frozen=True)
class ProtocolParams:
    quorum: float = 0.67
    update: UpdateParams = field(default_factory=UpdateParams)
    chb: ChbParams = field(default_factory=ChbParams)
    ballot_mode: BallotMode = BallotMode.ABSTRACT
    activation_cap: Optional[int] = None

    def __post_init__(self):
        q = as_fraction(self.quorum)
        if not (q > as_fraction("1/2") and q <= 1):
            raise ParameterError(f"quorum must satisfy 1/2 < Q <= 1, got {self.quorum}")
        object.__setattr__(self, "ballot_mode", BallotMode(self.ballot_mode))
        if self.activation_cap is not None and self.activation_cap < 1:
            raise ParameterError("activation_cap must be positive")

    def cap_for(self, n: int) -> int:
        return self.activation_cap if self.activation_cap is not None else 200 * n


BASELINE = ProtocolParams()


@dataclass
class PotentialTrace:
    """Potential after every lock or stall.

    ``events`` holds ``(time, phi, candidate, prior_count)`` per lock; a stall
    reset appears as ``(time, 0, None, None)``.
    """

    events: list[tuple[int, int, Optional[int], Optional[int]]] = field(default_factory=list)

    def record_lock(self, time: int, phi: int, candidate: int, prior: int) -> None:
        self.events.append((time, phi, candidate, prior))

    def record_reset(self, time: int) -> None:
        self.events.append((time, 0, None, None))

    @property
    def values(self) -> list[tuple[int, int]]:
        return [(t, phi) for t, phi, _, _ in self.events]

    def __len__(self) -> int:
        return len(self.events)


class SystemState:
    """Per-voter lock status over a profile restricted to the available candidates.

    Keeps the effective-ballot score rows (doubled Borda points and first-place
    indicator) in step with the lock states, so sampling only needs row sums.
    """

    def __init__(self, profile: Profile, mode: BallotMode = BallotMode.ABSTRACT):
        self.profile = profile
        self.mode = BallotMode(mode)
        self.n, self.m = profile.n, profile.m
        self._base_borda2 = 2 * borda_matrix(profile.ballots)
        self._base_first = np.zeros((self.n, self.m), dtype=np.int64)
        self._base_first[np.arange(self.n), profile.ballots[:, 0]] = 1
        a = self.m
        # abstract ballot: top gets m-1, each other candidate (m-2)/2 (doubled)
        self._abstract_borda2 = np.full((a, a), max(a - 2, 0), dtype=np.int64)
        np.fill_diagonal(self._abstract_borda2, 2 * (a - 1))
        self.reset()

    def reset(self) -> None:
        self.states = np.full(self.n, UNLOCKED, dtype=np.int64)
        self.lock_counts = np.zeros(self.m, dtype=np.int64)
        self.effective_borda2 = self._base_borda2.copy()
        self.effective_first = self._base_first.copy()
        self._unlocked = list(range(self.n))
        self._slot = list(range(self.n))

    def locked_on(self, voter: int) -> Optional[int]:
        s = int(self.states[voter])
        return None if s == UNLOCKED else s

    @property
    def unlocked(self) -> tuple[int, ...]:
        return tuple(sorted(self._unlocked))

    @property
    def n_unlocked(self) -> int:
        return len(self._unlocked)

    @property
    def phi(self) -> int:
        return int((self.lock_counts ** 2).sum())

    def pick_unlocked(self, rng: np.random.Generator) -> int:
        return self._unlocked[int(rng.integers(len(self._unlocked)))]

    def apply_lock(self, voter: int, candidate: int) -> int:
        """Lock ``voter`` on ``candidate`` and return the potential increase."""
        if self.states[voter] != UNLOCKED:
            raise AssertionError(f"voter {voter} is already locked on {int(self.states[voter])}")
        if not 0 <= candidate < self.m:
            raise ParameterError(f"candidate {candidate} is not available")
        prior = int(self.lock_counts[candidate])
        before = self.phi
        self.states[voter] = candidate
        self.lock_counts[candidate] += 1
        delta = self.phi - before
        if delta != 2 * prior + 1:
            raise AssertionError(f"potential moved by {delta}, expected {2 * prior + 1}")

        if self.mode is BallotMode.ABSTRACT:
            self.effective_borda2[voter] = self._abstract_borda2[candidate]
        else:
            row = self.profile.ballots[voter]
            promoted = np.concatenate(([candidate], row[row != candidate]))
            self.effective_borda2[voter, promoted] = 2 * np.arange(self.m - 1, -1, -1)
        self.effective_first[voter] = 0
        self.effective_first[voter, candidate] = 1

        # O(1) removal from the unlocked pool
        slot = self._slot[voter]
        last = self._unlocked.pop()
        if last != voter:
            self._unlocked[slot] = last
            self._slot[last] = slot
        return delta

    def check_quorum(self, quorum) -> Optional[int]:
        return check_quorum(self.lock_counts, self.n, quorum)


def apply_lock(state: SystemState, voter: int, candidate: int) -> int:
    return state.apply_lock(voter, candidate)


def quorum_threshold(n: int, quorum) -> int:
    return ceil_times(quorum, n)


def check_quorum(lock_counts, n: int, quorum) -> Optional[int]:
    """The candidate holding at least ``ceil(Q n)`` locks, or ``None``."""
    thr = quorum_threshold(n, quorum)
    hits = np.flatnonzero(np.asarray(lock_counts) >= thr)
    if len(hits) > 1:
        raise QuorumViolation(f"candidates {hits.tolist()} all meet the quorum threshold {thr}")
    return int(hits[0]) if len(hits) else None


@dataclass
class SingleWinnerResult:
    winner: int
    activations: int
    trace: PotentialTrace
    stalls: int
    locks: int = 0
    no_locks: int = 0


@dataclass
class FullRankingResult:
    ranking: tuple[int, ...]
    rounds: list[SingleWinnerResult]

    @property
    def activations(self) -> int:
        return sum(r.activations for r in self.rounds)

    @property
    def stalls(self) -> int:
        return sum(r.stalls for r in self.rounds)


def run_single_winner(
    profile: Profile,
    available: Optional[Iterable[int]],
    params: ProtocolParams,
    rng: np.random.Generator,
    event_log: Optional[list[str]] = None,
) -> SingleWinnerResult:
    """Run one rank-round over ``available`` (default: every candidate).

    Eliminated candidates are deleted from every ballot before scoring.
    ``event_log``, when given, receives ``t,voter,outcome,candidate,phi`` lines.
    """
    if available is None:
        available = range(profile.m)
    reduced, labels = profile.restrict(available)
    if len(labels) == 1:
        return SingleWinnerResult(labels[0], 0, PotentialTrace(), 0)
    n = reduced.n
    if params.update.k > n - 1:
        raise ParameterError(f"k={params.update.k} exceeds the n-1={n - 1} other voters")

    state = SystemState(reduced, params.ballot_mode)
    cap = params.cap_for(n)
    trace = PotentialTrace()
    t = stalls = locks = no_locks = 0
    winner = None
    while winner is None:
        if t >= cap:
            raise NonConvergenceError(f"no quorum after {t} activations (cap {cap})", t, trace, stalls)
        voter = state.pick_unlocked(rng)
        outcome: UpdateOutcome = update_voter(voter, state, params.update, params.chb, rng)
        t += 1
        if outcome.locked:
            c = outcome.candidate
            prior = int(state.lock_counts[c])
            state.apply_lock(voter, c)
            locks += 1
            trace.record_lock(t, state.phi, labels[c], prior)
            if event_log is not None:
                event_log.append(f"{t},{voter},LOCK,{labels[c]},{state.phi}")
            winner = state.check_quorum(params.quorum)
            if winner is None and state.n_unlocked == 0:
                stalls += 1
                log.debug("stall at t=%d: all %d voters locked without quorum", t, n)
                state.reset()
                trace.record_reset(t)
                if event_log is not None:
                    event_log.append(f"{t},-1,STALL,-1,0")
        else:
            no_locks += 1
            if event_log is not None:
                event_log.append(f"{t},{voter},NOLOCK,-1,{state.phi}")
    return SingleWinnerResult(labels[winner], t, trace, stalls, locks, no_locks)


def run_full_ranking(profile: Profile, params: ProtocolParams, rng: np.random.Generator,
                     event_log: Optional[list[str]] = None) -> FullRankingResult:
    """Repeat single-winner rounds, removing each winner, until one candidate is left.

    ``event_log`` receives the first rank-round's events only.
    """
    available = list(range(profile.m))
    ranking: list[int] = []
    rounds: list[SingleWinnerResult] = []
    while len(available) > 1:
        res = run_single_winner(profile, available, params, rng, event_log if not rounds else None)
        rounds.append(res)
        ranking.append(res.winner)
        available.remove(res.winner)
    ranking.append(available[0])
    return FullRankingResult(tuple(ranking), rounds)
