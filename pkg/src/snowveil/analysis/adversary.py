"""Burying coalitions: analytic margins and simulated attacks.

A coalition wants ``p_c`` to beat the honest winner ``p_star``.  Each member
reports ``p_c`` first and ``p_star`` last, which is the largest negative
per-ballot swing available against ``p_star``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .._rational import as_fraction
from ..chb import ChbParams
from ..preferences import ParameterError, Profile, _rng, borda_matrix, canonical_winner
from ..protocol import NonConvergenceError, ProtocolParams, run_single_winner


@dataclass(frozen=True)
class CoalitionScenario:
    """Electorate of ``n`` with ``c`` buriers, ``m`` candidates, honest margin ``delta``, sample size ``k``."""

    n: int
    c: int
    m: int
    delta: Fraction
    k: int = 10

    def __post_init__(self):
        object.__setattr__(self, "delta", as_fraction(self.delta))
        if self.n < 1 or not 0 <= self.c <= self.n:
            raise ParameterError(f"need n >= 1 and 0 <= c <= n, got n={self.n}, c={self.c}")
        if self.m < 2:
            raise ParameterError(f"m must be >= 2, got {self.m}")
        if self.delta <= 0:
            raise ParameterError(f"delta must be positive, got {self.delta}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")


def minimal_coalition(n: int, m: int, delta) -> int:
    """Smallest coalition that cancels the expected sample margin: ``ceil(n delta / (delta + m - 1))``."""
    delta = as_fraction(delta)
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if n < 1 or m < 2:
        raise ParameterError(f"need n >= 1 and m >= 2, got n={n}, m={m}")
    return math.ceil(n * delta / (delta + m - 1))


def expected_sample_margin(sc: CoalitionScenario) -> Fraction:
    """``k * ((n - c)/n * delta - c/n * (m - 1))``, exact."""
    return _margin_formula(sc.n, sc.c, sc.m, sc.delta, sc.k)


def _margin_formula(n: int, c: int, m: int, delta: Fraction, k: int) -> Fraction:
    return k * (Fraction(n - c, n) * delta - Fraction(c, n) * (m - 1))


def bury(ranking: Sequence[int], p_c: int, p_star: int) -> tuple[int, ...]:
    """``p_c`` first, ``p_star`` last, everyone else in their original relative order."""
    if p_c == p_star:
        raise ParameterError("the coalition target must differ from the honest winner")
    middle = tuple(int(x) for x in ranking if x not in (p_c, p_star))
    return (p_c,) + middle + (p_star,)


def bury_profile(profile: Profile, coalition: Iterable[int], p_c: int, p_star: int) -> Profile:
    ballots = profile.ballots.copy()
    for v in coalition:
        ballots[v] = bury(profile.ballots[v], p_c, p_star)
    return Profile(ballots)


def voter_margins(profile: Profile, p_star: int, p_c: int) -> np.ndarray:
    """Per-voter Borda difference ``B(p_star, R_i) - B(p_c, R_i)``."""
    pts = borda_matrix(profile.ballots)
    return pts[:, p_star] - pts[:, p_c]


def per_voter_margin(profile: Profile, p_star: int, p_c: int, voters: Optional[Iterable[int]] = None) -> Fraction:
    """Mean honest margin of ``p_star`` over ``p_c`` among ``voters`` (default: everyone)."""
    d = voter_margins(profile, p_star, p_c)
    if voters is not None:
        d = d[list(voters)]
    if len(d) == 0:
        raise ParameterError("no honest voters to average over")
    return Fraction(int(d.sum()), len(d))


def margin_electorate(n: int, m: int, lead: float = 0.5, p_star: int = 0, seed=None) -> Profile:
    """Random rankings, with ``p_star`` moved to the top on a ``lead`` share of them.

    Gives ``p_star`` a clear lead over everyone; the exact margins are read
    back from the ballots rather than assumed.
    """
    if not 0 <= lead <= 1:
        raise ParameterError(f"lead must lie in [0, 1], got {lead}")
    rng = _rng(seed)
    ballots = rng.permuted(np.tile(np.arange(m), (n, 1)), axis=1)
    promoted = rng.random(n) < lead
    for i in np.flatnonzero(promoted):
        row = ballots[i]
        ballots[i] = np.concatenate(([p_star], row[row != p_star]))
    return Profile(ballots)


def coalition_order(profile: Profile, p_c: int, seed=None) -> np.ndarray:
    """Voters in the order they are recruited; prefixes give nested coalitions.

    Voters already ranking ``p_c`` first join last, since rewriting them
    changes the least.
    """
    rng = _rng(seed)
    order = rng.permutation(profile.n)
    return np.concatenate([order[profile.ballots[order, 0] != p_c], order[profile.ballots[order, 0] == p_c]])


@dataclass(frozen=True)
class AdversaryOutcome:
    winner: Optional[int]
    p_star_won: bool
    activations: int
    stalls: int
    converged: bool


def run_adversary_trial(profile: Profile, coalition: Iterable[int], p_c: int, p_star: int,
                        params: ProtocolParams, rng) -> AdversaryOutcome:
    """Rewrite the coalition's ballots and run one single-winner round."""
    coalition = list(coalition)
    if any(not 0 <= v < profile.n for v in coalition):
        raise ParameterError("coalition members must be voters of the profile")
    attacked = bury_profile(profile, coalition, p_c, p_star) if coalition else profile
    try:
        res = run_single_winner(attacked, None, params, _rng(rng))
    except NonConvergenceError as exc:
        return AdversaryOutcome(None, False, exc.activations, exc.stalls, False)
    return AdversaryOutcome(res.winner, res.winner == p_star, res.activations, res.stalls, True)


def sample_margins(margins: np.ndarray, k: int, samples: int, rng, chunk: int = 10_000) -> np.ndarray:
    """Sum of ``margins`` over ``samples`` uniform ``k``-subsets of voters (without replacement)."""
    rng = _rng(rng)
    margins = np.asarray(margins)
    n = len(margins)
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    out = np.empty(samples, dtype=np.int64)
    for start in range(0, samples, chunk):
        size = min(chunk, samples - start)
        keys = rng.random((size, n))
        idx = keys.argpartition(k - 1, axis=1)[:, :k] if k < n else np.tile(np.arange(n), (size, 1))
        out[start:start + size] = margins[idx].sum(axis=1)
    return out


@dataclass(frozen=True)
class SweepRow:
    c: int
    delta: Fraction
    expected_margin: Fraction
    threshold: int
    trials: int
    p_star_wins: int
    p_c_wins: int
    excluded: int

    @property
    def win_rate(self) -> float:
        done = self.trials - self.excluded
        return self.p_star_wins / done if done else float("nan")


def coalition_grid(n: int, c_min: int) -> list[int]:
    fractions = (0, 0.25, 0.5, 0.75, 1, 1.25, 1.5, 2)
    return sorted({min(n, round(f * c_min)) for f in fractions} | {min(n, c_min)})


def adversary_sweep(profile: Profile, p_star: int, p_c: int, params: ProtocolParams, trials: int,
                    base_seed: int, sizes: Optional[Sequence[int]] = None) -> list[SweepRow]:
    """Win rate of ``p_star`` against nested coalitions of growing size.

    Every coalition size reuses the same per-trial seeds, so differences
    between rows come from the coalition and not from sampling noise.
    """
    delta0 = per_voter_margin(profile, p_star, p_c)
    if delta0 <= 0:
        raise ParameterError(f"honest margin of {p_star} over {p_c} is {delta0}; need delta > 0")
    c_min = minimal_coalition(profile.n, profile.m, delta0)
    sizes = coalition_grid(profile.n, c_min) if sizes is None else sorted(set(sizes))
    order = coalition_order(profile, p_c, seed=np.random.SeedSequence(base_seed, spawn_key=(1 << 20,)))
    k = params.update.k
    rows = []
    for c in sizes:
        if not 0 <= c <= profile.n:
            raise ParameterError(f"coalition size {c} out of range 0..{profile.n}")
        members = order[:c]
        honest = order[c:]
        delta = per_voter_margin(profile, p_star, p_c, honest) if c < profile.n else delta0
        # honest margin among the voters left over can dip to zero for big c
        expected = _margin_formula(profile.n, c, profile.m, delta, k)
        wins = pc_wins = excluded = 0
        for i in range(trials):
            out = run_adversary_trial(profile, members, p_c, p_star, params,
                                      np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(i,))))
            wins += out.p_star_won
            pc_wins += out.winner == p_c
            excluded += not out.converged
        rows.append(SweepRow(c, delta, expected, c_min, trials, wins, pc_wins, excluded))
    return rows


def honest_pair(profile: Profile, chb: ChbParams) -> tuple[int, int]:
    """The canonical winner and its strongest Borda rival."""
    p_star = canonical_winner(profile, chb)
    scores = profile.borda_scores().astype(float)
    scores[p_star] = -np.inf
    return p_star, int(np.argmax(scores))
