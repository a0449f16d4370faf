"""Seeded trial batches and their summary statistics."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .chb import ChbParams
from .preferences import (
    ParameterError,
    Profile,
    canonical_winner,
    generate_impartial_culture,
    generate_polarised,
)
from .protocol import NonConvergenceError, ProtocolParams, run_full_ranking, run_single_winner

MODELS = ("ic", "polarised", "unanimous_first", "file")


@dataclass(frozen=True)
class ElectorateSpec:
    """How each trial's electorate is drawn.

    ``ic``: uniform random rankings.  ``polarised``: base ranking against its
    reverse, ``split`` of the voters on the base side.  ``unanimous_first``:
    every voter ranks ``top`` first, the rest uniformly at random.  ``file``:
    the fixed profile at ``path`` for every trial.
    """

    model: str = "ic"
    n: int = 100
    m: int = 5
    split: float = 0.5
    top: int = 0
    path: Optional[str] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ParameterError(f"unknown electorate model {self.model!r}; expected one of {', '.join(MODELS)}")
        if self.model == "file":
            if not self.path:
                raise ParameterError("electorate model 'file' needs a path")
            return
        if self.n < 2 or self.m < 2:
            raise ParameterError(f"need n >= 2 and m >= 2, got n={self.n}, m={self.m}")
        if self.model == "unanimous_first" and not 0 <= self.top < self.m:
            raise ParameterError(f"top {self.top} out of range 0..{self.m - 1}")

    def generate(self, seed) -> Profile:
        if self.model == "ic":
            return generate_impartial_culture(self.n, self.m, seed)
        if self.model == "polarised":
            return generate_polarised(self.n, self.m, self.split, seed)
        if self.model == "unanimous_first":
            rng = np.random.default_rng(seed)
            rest = np.array([c for c in range(self.m) if c != self.top])
            tails = rng.permuted(np.tile(rest, (self.n, 1)), axis=1)
            return Profile(np.column_stack([np.full(self.n, self.top), tails]))
        return _load_profile(self.path)


_PROFILE_CACHE: dict[str, Profile] = {}


def _load_profile(path: str) -> Profile:
    if path not in _PROFILE_CACHE:
        _PROFILE_CACHE[path] = Profile.load(path)
    return _PROFILE_CACHE[path]


@dataclass(frozen=True)
class TrialConfig:
    electorate: ElectorateSpec = field(default_factory=ElectorateSpec)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    trials: int = 50
    base_seed: int = 0
    full_ranking: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class TrialResult:
    """One trial.  ``convergence_time`` counts update calls in the first rank-round."""

    trial: int
    convergence_time: int
    winner: Optional[int]
    accurate: bool
    stalls: int
    converged: bool = True
    ranking: Optional[tuple[int, ...]] = None
    per_rank_times: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class AggregateStats:
    """Summary over converged trials; ``ci95`` is the normal half-width ``1.96 sd / sqrt(N)``."""

    trials: int
    excluded: int
    mean: float
    sd: float
    ci95: float
    min: int
    max: int
    accuracy: float
    stall_rate: float
    mean_stalls: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def trial_seeds(base_seed: int, i: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent electorate and protocol streams for trial ``i``.

    Keyed on ``(base_seed, i)`` alone, so adding trials leaves earlier ones untouched.
    """
    root = np.random.SeedSequence(base_seed, spawn_key=(i,))
    electorate, protocol = root.spawn(2)
    return electorate, protocol


def run_trial(config: TrialConfig, i: int, event_log: Optional[list[str]] = None) -> TrialResult:
    """Trial ``i`` of ``config``.  ``event_log`` collects the first rank-round's events."""
    e_seed, p_seed = trial_seeds(config.base_seed, i)
    profile = config.electorate.generate(e_seed)
    rng = np.random.default_rng(p_seed)
    target = canonical_winner(profile, config.protocol.chb)
    try:
        if config.full_ranking:
            res = run_full_ranking(profile, config.protocol, rng, event_log)
            times = tuple(r.activations for r in res.rounds)
            winner = res.ranking[0]
            return TrialResult(i, times[0], winner, winner == target, res.stalls, True, res.ranking, times)
        res = run_single_winner(profile, None, config.protocol, rng, event_log)
    except NonConvergenceError as exc:
        return TrialResult(i, exc.activations, None, False, exc.stalls, converged=False)
    return TrialResult(i, res.activations, res.winner, res.winner == target, res.stalls)


def aggregate(results: Sequence[TrialResult]) -> AggregateStats:
    """Statistics over ``results``; non-converged trials are counted, never averaged in."""
    if not results:
        raise ParameterError("no results to aggregate")
    done = sorted((r for r in results if r.converged), key=lambda r: r.trial)
    excluded = len(results) - len(done)
    if not done:
        nan = float("nan")
        return AggregateStats(len(results), excluded, nan, nan, nan, 0, 0, nan, nan, nan)
    times = np.array([r.convergence_time for r in done], dtype=float)
    sd = float(times.std(ddof=1)) if len(times) > 1 else 0.0
    stalls = np.array([r.stalls for r in done])
    return AggregateStats(
        trials=len(results),
        excluded=excluded,
        mean=float(times.mean()),
        sd=sd,
        ci95=1.96 * sd / math.sqrt(len(times)),
        min=int(times.min()),
        max=int(times.max()),
        accuracy=float(np.mean([r.accurate for r in done])),
        stall_rate=float(np.mean(stalls > 0)),
        mean_stalls=float(stalls.mean()),
    )


def run_trials(config: TrialConfig, workers: int = 1) -> tuple[list[TrialResult], AggregateStats]:
    """Run every trial of ``config``, optionally across worker processes.

    Each trial depends only on ``(config, i)``, so results are identical for
    any worker count.
    """
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    idx = range(config.trials)
    if workers == 1:
        results = [run_trial(config, i) for i in idx]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, config.trials // (4 * workers))
            results = list(pool.map(run_trial, [config] * config.trials, idx, chunksize=chunk))
    return results, aggregate(results)
