"""Constrained Hybrid Borda (CHB) aggregation.

Scores are kept exact.  Borda points are stored doubled (``borda2``) so the
half points introduced by abstract locked ballots stay integral, and every
comparison against ``alpha``, ``beta`` and ``lambda`` is done in integer
arithmetic on their rational values.  Ties at every stage go to the lowest
candidate index.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._rational import as_fraction, ceil_times
from .preferences import AbstractBallot, FullBallot, ParameterError, Profile, borda_matrix


@dataclass(frozen=True)
class ChbParams:
    """Popularity filter ``alpha``, consensus filter ``beta``, hybrid weight ``lam``."""

    alpha: float = 0.1
    beta: float = 0.8
    lam: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta", "lam"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ScoreTable:
    """Aggregated scores of a sample of ``sample_size`` ballots over ``m`` candidates.

    ``borda2`` holds twice the Borda score of each candidate.
    """

    borda2: tuple[int, ...]
    first_place: tuple[int, ...]
    sample_size: int
    m: int

    def __post_init__(self):
        if len(self.borda2) != self.m or len(self.first_place) != self.m:
            raise ParameterError("score vectors must have length m")
        if self.sample_size < 1:
            raise ParameterError("sample_size must be >= 1")

    @property
    def borda(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(b, 2) for b in self.borda2)

    @classmethod
    def from_scores(cls, borda: Sequence, first_place: Sequence[int], sample_size: int) -> "ScoreTable":
        """Build a table from (possibly half-integral) Borda scores."""
        borda2 = []
        for b in borda:
            twice = Fraction(b) * 2
            if twice.denominator != 1:
                raise ParameterError(f"Borda score {b} is not a multiple of 1/2")
            borda2.append(int(twice))
        return cls(tuple(borda2), tuple(int(t) for t in first_place), int(sample_size), len(borda2))


def score_sample(ballots: Iterable, m: int) -> ScoreTable:
    """Tally a sample of effective ballots.

    Full ballots (or plain sequences) score ``m-1-position``.  An abstract
    ballot gives its top candidate ``m-1`` points and every other candidate
    ``(m-2)/2``, so each ballot carries the same total mass.
    """
    borda2 = [0] * m
    first = [0] * m
    k = 0
    for ballot in ballots:
        k += 1
        if isinstance(ballot, AbstractBallot):
            top = ballot.top
            if not 0 <= top < m:
                raise ParameterError(f"candidate {top} out of range 0..{m - 1}")
            for c in range(m):
                borda2[c] += 2 * (m - 1) if c == top else m - 2
        else:
            order = ballot.order if isinstance(ballot, FullBallot) else tuple(ballot)
            if len(order) != m or sorted(order) != list(range(m)):
                raise ParameterError(f"ballot {order} is not a permutation of 0..{m - 1}")
            top = order[0]
            for pos, c in enumerate(order):
                borda2[c] += 2 * (m - 1 - pos)
        first[top] += 1
    if k == 0:
        raise ParameterError("cannot score an empty sample")
    return ScoreTable(tuple(borda2), tuple(first), k, m)


def table_from_profile(profile: Profile) -> ScoreTable:
    borda2 = 2 * borda_matrix(profile.ballots).sum(axis=0)
    first = profile.first_place_counts()
    return ScoreTable(tuple(int(b) for b in borda2), tuple(int(t) for t in first), profile.n, profile.m)


def popularity_threshold(alpha, k: int) -> int:
    """``ceil(alpha * k)``, exact."""
    return ceil_times(alpha, k)


@functools.lru_cache(maxsize=256)
def _rule_constants(params: ChbParams, k: int) -> tuple[int, int, int, int, int]:
    beta = as_fraction(params.beta)
    lam = as_fraction(params.lam)
    return popularity_threshold(params.alpha, k), beta.numerator, beta.denominator, lam.numerator, lam.denominator


def hybrid_key(borda2, first, m: int, lam) -> np.ndarray:
    """Integer key proportional to the hybrid score.

    ``H = (1-lam) * B / (k (m-1)) + lam * t / k``; multiplying by
    ``2 k (m-1) * den(lam)`` gives ``(den - num) * borda2 + 2 num (m-1) * t``.
    """
    lam = as_fraction(lam)
    ln, ld = lam.numerator, lam.denominator
    return (ld - ln) * np.asarray(borda2, dtype=np.int64) + 2 * ln * (m - 1) * np.asarray(first, dtype=np.int64)


def chb_winners(borda2: np.ndarray, first: np.ndarray, k: int, params: ChbParams) -> np.ndarray:
    """Vectorised CHB over a batch of samples.

    ``borda2`` and ``first`` have shape ``(rounds, m)``; returns one winner per row.
    """
    borda2 = np.atleast_2d(np.asarray(borda2, dtype=np.int64))
    first = np.atleast_2d(np.asarray(first, dtype=np.int64))
    m = borda2.shape[1]
    thr, bn, bd, ln, ld = _rule_constants(params, k)
    rows = np.arange(borda2.shape[0])

    # argmax returns the first maximum, i.e. the lowest index on ties
    bstar = borda2.argmax(axis=1)
    bmax = borda2[rows, bstar]
    popular = first >= thr
    eligible = popular & (borda2 * bd >= bn * bmax[:, None])
    key = (ld - ln) * borda2 + 2 * ln * (m - 1) * first
    key = np.where(eligible, key, -1)
    hybrid = key.argmax(axis=1)
    return np.where(popular[rows, bstar], bstar, np.where(eligible.any(axis=1), hybrid, bstar))


def chb_winner(table: ScoreTable, params: ChbParams) -> int:
    """The unique CHB winner of a scored sample.

    1. The Borda winner wins outright if it is alpha-popular.
    2. Otherwise, among candidates that are alpha-popular and have Borda
       score at least ``beta * B_max``, the highest hybrid score wins.
    3. If no candidate is eligible, the Borda winner wins by default.
    """
    w = chb_winners(np.array([table.borda2]), np.array([table.first_place]), table.sample_size, params)
    return int(w[0])


def chb_stage(table: ScoreTable, params: ChbParams) -> str:
    """Which branch of the rule decided: ``"popular_borda"``, ``"hybrid"`` or ``"default"``."""
    thr = popularity_threshold(params.alpha, table.sample_size)
    b = np.asarray(table.borda2)
    bstar = int(b.argmax())
    if table.first_place[bstar] >= thr:
        return "popular_borda"
    beta = as_fraction(params.beta)
    bmax = int(b[bstar])
    eligible = [
        j for j in range(table.m)
        if table.first_place[j] >= thr and table.borda2[j] * beta.denominator >= beta.numerator * bmax
    ]
    return "hybrid" if eligible else "default"


def hybrid_score(table: ScoreTable, j: int, params: ChbParams) -> Fraction:
    """Exact hybrid score of candidate ``j`` (a value in ``[0, 1]``)."""
    if not 0 <= j < table.m:
        raise ParameterError(f"candidate {j} out of range 0..{table.m - 1}")
    lam = as_fraction(params.lam)
    k, m = table.sample_size, table.m
    plurality = Fraction(table.first_place[j], k)
    if m == 1:
        return (1 - lam) + lam * plurality
    return (1 - lam) * Fraction(table.borda2[j], 2 * k * (m - 1)) + lam * plurality


def min_hybrid_delta(k: int, m: int, lam) -> Fraction:
    """Hybrid-score gain from a one-point Borda improvement: ``(1 - lam) / (k (m - 1))``."""
    if k < 1 or m < 2:
        raise ParameterError(f"need k >= 1 and m >= 2, got k={k}, m={m}")
    lam = as_fraction(lam)
    if lam >= 1:
        raise ParameterError("lambda = 1 leaves no Borda component; the minimal hybrid step is undefined")
    return (1 - lam) / (k * (m - 1))
