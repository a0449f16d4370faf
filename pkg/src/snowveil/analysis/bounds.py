"""Hoeffding-style bounds on drawing a misleading sample, and their empirical check.

For a sample of ``k`` ballots drawn i.i.d. from an electorate whose winner
``p_star`` leads competitor ``j`` by a mean per-ballot Borda margin
``delta_j`` and is ranked first by a share ``mu`` of ballots:

* ``P(E_j) <= exp(-k delta_j^2 / (2 (m-1)^2))``, where ``E_j`` is the sample
  Borda score of ``j`` reaching that of ``p_star``;
* ``P(B) <= exp(-2 k delta_alpha^2)`` with ``delta_alpha = mu - alpha``, where
  ``B`` is ``p_star`` falling short of ``ceil(alpha k)`` first places;
* the union of all of them is at most ``m exp(-C_min k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .._rational import as_fraction
from ..chb import ChbParams, chb_winners, popularity_threshold
from ..preferences import ParameterError, Profile, _rng, borda_matrix


@dataclass(frozen=True)
class FailureBoundInputs:
    k: int
    m: int
    delta_j: tuple[float, ...]
    delta_alpha: float

    def __post_init__(self):
        object.__setattr__(self, "delta_j", tuple(self.delta_j))
        if self.k < 0:
            raise ParameterError(f"k must be >= 0, got {self.k}")
        if self.m < 2:
            raise ParameterError(f"m must be >= 2, got {self.m}")
        if not self.delta_j:
            raise ParameterError("need at least one competitor margin")
        if any(d <= 0 for d in self.delta_j) or self.delta_alpha <= 0:
            raise ParameterError("bounds are only defined for strictly positive margins")


@dataclass(frozen=True)
class FailureBounds:
    per_competitor: tuple[float, ...]
    plurality: float
    union: float
    union_sum: float
    c_min: float


def failure_probability_bound(inputs: FailureBoundInputs) -> FailureBounds:
    """Per-competitor, plurality and union bounds, each clamped to 1.

    ``union`` is the uniform form ``m exp(-C_min k)``; ``union_sum`` adds the
    individual bounds instead and is never larger.
    """
    k, m = inputs.k, inputs.m
    per = tuple(math.exp(-k * d * d / (2 * (m - 1) ** 2)) for d in inputs.delta_j)
    plural = math.exp(-2 * k * inputs.delta_alpha ** 2)
    c_min = min(2 * inputs.delta_alpha ** 2, min(d * d for d in inputs.delta_j) / (2 * (m - 1) ** 2))
    union = min(1.0, m * math.exp(-c_min * k))
    union_sum = min(1.0, plural + sum(per))
    return FailureBounds(per, plural, union, union_sum, c_min)


@dataclass(frozen=True)
class Electorate:
    """Ballot types with exact weights; sampling is i.i.d. from this distribution."""

    ballots: np.ndarray
    weights: tuple[Fraction, ...]

    @property
    def m(self) -> int:
        return self.ballots.shape[1]

    def margins(self, p_star: int) -> tuple[dict[int, Fraction], Fraction]:
        """Exact ``delta_j`` for every ``j != p_star`` and the first-place share ``mu`` of ``p_star``."""
        pts = borda_matrix(self.ballots)
        deltas = {}
        for j in range(self.m):
            if j != p_star:
                deltas[j] = sum((w * int(pts[i, p_star] - pts[i, j]) for i, w in enumerate(self.weights)), Fraction(0))
        mu = sum((w for i, w in enumerate(self.weights) if self.ballots[i, 0] == p_star), Fraction(0))
        return deltas, mu

    def to_profile(self, scale: int) -> Profile:
        """Materialise ``scale`` voters; every weight times ``scale`` must be integral."""
        rows = []
        for b, w in zip(self.ballots, self.weights):
            count = w * scale
            if count.denominator != 1:
                raise ParameterError(f"weight {w} is not a multiple of 1/{scale}")
            rows.extend([b] * int(count))
        return Profile(rows)


def block_electorate(m: int, lead_share, p_star: int = 0) -> Electorate:
    """Engineered electorate with known margins.

    A ``lead_share`` of ballots rank ``p_star`` first and the others in index
    order.  The rest is split evenly over the ``m - 1`` rotations that put each
    competitor first, keeping ``p_star`` second.  Every margin is an exact
    rational fixed by construction.
    """
    lead_share = as_fraction(lead_share)
    if not 0 < lead_share <= 1:
        raise ParameterError(f"lead_share must lie in (0, 1], got {lead_share}")
    others = [c for c in range(m) if c != p_star]
    ballots = [[p_star, *others]]
    weights = [lead_share]
    rest = (1 - lead_share) / len(others)
    if rest:
        for i, j in enumerate(others):
            tail = others[i + 1:] + others[:i]
            ballots.append([j, p_star, *tail])
            weights.append(rest)
    return Electorate(np.array(ballots, dtype=np.int64), tuple(weights))


def bound_inputs(electorate: Electorate, p_star: int, k: int, alpha) -> FailureBoundInputs:
    deltas, mu = electorate.margins(p_star)
    return FailureBoundInputs(k, electorate.m, tuple(float(d) for d in deltas.values()), float(mu - as_fraction(alpha)))


@dataclass(frozen=True)
class MisleadingRates:
    samples: int
    wrong_winner: float
    failure_event: float


def misleading_sample_rate(electorate: Electorate, p_star: int, k: int, chb: ChbParams, samples: int,
                           rng=None, chunk: int = 20_000) -> MisleadingRates:
    """Empirical rates over ``samples`` i.i.d. ``k``-samples.

    ``wrong_winner`` counts samples whose CHB winner is not ``p_star``;
    ``failure_event`` counts samples in the union of the bounded events (any
    competitor tying or beating ``p_star`` in Borda, or ``p_star`` short of
    the popularity threshold).  The first is contained in the second.
    """
    rng = _rng(rng)
    probs = np.array([float(w) for w in electorate.weights])
    probs = probs / probs.sum()
    pts2 = 2 * borda_matrix(electorate.ballots)
    firsts = (electorate.ballots[:, :1] == np.arange(electorate.m)).astype(np.int64)
    thr = popularity_threshold(chb.alpha, k)
    wrong = fail = 0
    for start in range(0, samples, chunk):
        size = min(chunk, samples - start)
        counts = rng.multinomial(k, probs, size=size)
        borda2 = counts @ pts2
        first = counts @ firsts
        winners = chb_winners(borda2, first, k, chb)
        wrong += int((winners != p_star).sum())
        rivals = np.delete(borda2, p_star, axis=1)
        event = (rivals >= borda2[:, [p_star]]).any(axis=1) | (first[:, p_star] < thr)
        fail += int(event.sum())
    return MisleadingRates(samples, wrong / samples, fail / samples)
