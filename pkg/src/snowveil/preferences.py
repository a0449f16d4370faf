"""Ballots, profiles and electorate generators.

A profile is stored as an ``(n, m)`` integer array; row ``i`` is voter ``i``'s
strict ranking, best candidate first.  Candidates are the integers ``0..m-1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence, Union

import numpy as np

from ._rational import floor_times

if TYPE_CHECKING:
    from .chb import ChbParams


class ParameterError(ValueError):
    """Raised for out-of-domain model or protocol parameters."""


class ProfileError(ValueError):
    """Raised when ballots do not form a valid profile."""


class BallotMode(str, enum.Enum):
    """How a locked voter's ballot looks to the voters that sample it."""

    PROMOTE = "promote"
    ABSTRACT = "abstract"


@dataclass(frozen=True)
class FullBallot:
    order: tuple[int, ...]

    @property
    def top(self) -> int:
        return self.order[0]


@dataclass(frozen=True)
class AbstractBallot:
    """Locked ballot reduced to its top choice; the rest is a neutral placeholder."""

    top: int


EffectiveBallot = Union[FullBallot, AbstractBallot]


def is_permutation(order: Sequence[int], m: int | None = None) -> bool:
    m = len(order) if m is None else m
    return len(order) == m and sorted(int(c) for c in order) == list(range(m))


class Profile:
    """Immutable multiset of ``n`` strict rankings over ``m`` candidates."""

    __slots__ = ("_ballots",)

    def __init__(self, ballots: Union[np.ndarray, Iterable[Sequence[int]]]):
        arr = np.array(ballots, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ProfileError("a profile needs at least one ballot")
        n, m = arr.shape
        if m < 1:
            raise ProfileError("ballots must rank at least one candidate")
        expected = np.arange(m)
        if not np.array_equal(np.sort(arr, axis=1), np.broadcast_to(expected, arr.shape)):
            bad = int(np.nonzero((np.sort(arr, axis=1) != expected).any(axis=1))[0][0])
            raise ProfileError(f"ballot {bad} is not a permutation of 0..{m - 1}: {arr[bad].tolist()}")
        arr.setflags(write=False)
        self._ballots = arr

    @property
    def ballots(self) -> np.ndarray:
        """Read-only ``(n, m)`` view of the rankings."""
        return self._ballots

    @property
    def n(self) -> int:
        return self._ballots.shape[0]

    @property
    def m(self) -> int:
        return self._ballots.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self._ballots[i])

    def __iter__(self):
        return (self[i] for i in range(self.n))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Profile) and np.array_equal(self._ballots, other._ballots)

    def __hash__(self) -> int:
        return hash((self._ballots.shape, self._ballots.tobytes()))

    def __repr__(self) -> str:
        return f"Profile(n={self.n}, m={self.m})"

    def first_place_counts(self) -> np.ndarray:
        return np.bincount(self._ballots[:, 0], minlength=self.m)

    def borda_scores(self) -> np.ndarray:
        return borda_matrix(self._ballots).sum(axis=0)

    def restrict(self, available: Iterable[int]) -> tuple["Profile", tuple[int, ...]]:
        """Delete every candidate outside ``available`` and relabel survivors.

        Survivors are relabelled ``0..a-1`` in increasing order of their original
        index, so lowest-index tie-breaking is preserved.  Returns the reduced
        profile and the tuple mapping new labels back to original candidates.
        """
        keep = tuple(sorted(set(int(c) for c in available)))
        if not keep:
            raise ParameterError("no available candidates")
        if keep[0] < 0 or keep[-1] >= self.m:
            raise ParameterError(f"available candidates out of range 0..{self.m - 1}")
        relabel = np.full(self.m, -1, dtype=np.int64)
        relabel[list(keep)] = np.arange(len(keep))
        mapped = relabel[self._ballots]
        reduced = mapped[mapped >= 0].reshape(self.n, len(keep))
        return Profile(reduced), keep

    def to_text(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines.extend(" ".join(str(int(c)) for c in row) for row in self._ballots)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Profile":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows:
            raise ProfileError("empty profile text")
        try:
            n, m = (int(v) for v in rows[0])
            ballots = [[int(v) for v in row] for row in rows[1:]]
        except ValueError as exc:
            raise ProfileError(f"malformed profile text: {exc}") from None
        if len(ballots) != n:
            raise ProfileError(f"header declares {n} ballots, found {len(ballots)}")
        for i, b in enumerate(ballots):
            if len(b) != m:
                raise ProfileError(f"ballot {i} has {len(b)} entries, header declares m={m}")
        return cls(ballots)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Profile":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def borda_matrix(ballots: np.ndarray) -> np.ndarray:
    """Per-ballot Borda points: ``out[i, c]`` is ``m-1-position`` of ``c`` on ballot ``i``."""
    ballots = np.asarray(ballots)
    n, m = ballots.shape
    out = np.empty((n, m), dtype=np.int64)
    rows = np.arange(n)[:, None]
    out[rows, ballots] = np.arange(m - 1, -1, -1)
    return out


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_impartial_culture(n: int, m: int, seed=None) -> Profile:
    """``n`` independent uniformly random rankings of ``m`` candidates."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if m < 2:
        raise ParameterError(f"m must be >= 2, got {m}")
    rng = _rng(seed)
    return Profile(rng.permuted(np.tile(np.arange(m), (n, 1)), axis=1))


def generate_polarised(n: int, m: int, split: float = 0.5, seed=None) -> Profile:
    """Two opposing factions.

    ``floor(split * n)`` voters rank ``0, 1, ..., m-1`` and the rest rank the
    exact reverse.  Voter order is shuffled with ``seed`` so that the factions
    are interleaved; counts do not depend on the seed.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if m < 2:
        raise ParameterError(f"m must be >= 2, got {m}")
    if not 0 < split < 1:
        raise ParameterError(f"split must lie strictly between 0 and 1, got {split}")
    n_base = floor_times(split, n)
    base = np.arange(m)
    ballots = np.vstack([np.tile(base, (n_base, 1)), np.tile(base[::-1], (n - n_base, 1))])
    if seed is not None:
        ballots = ballots[_rng(seed).permutation(n)]
    return Profile(ballots)


def unanimous_profile(n: int, order: Sequence[int]) -> Profile:
    return Profile(np.tile(np.asarray(order, dtype=np.int64), (n, 1)))


def promote(order: Sequence[int], candidate: int) -> tuple[int, ...]:
    """Move ``candidate`` to the front, keeping the others in their relative order."""
    order = tuple(int(c) for c in order)
    if candidate not in order:
        raise ParameterError(f"candidate {candidate} not on ballot {order}")
    return (candidate,) + tuple(c for c in order if c != candidate)


def effective_ballot(ranking: Sequence[int], locked: int | None, mode: BallotMode = BallotMode.ABSTRACT) -> EffectiveBallot:
    """What a sampler sees of a voter with private ``ranking``.

    ``locked`` is ``None`` for an unlocked voter, otherwise the candidate the
    voter is locked on.
    """
    if locked is None:
        return FullBallot(tuple(int(c) for c in ranking))
    if BallotMode(mode) is BallotMode.PROMOTE:
        return FullBallot(promote(ranking, locked))
    return AbstractBallot(int(locked))


def canonical_winner(profile: Profile, chb: "ChbParams") -> int:
    """The CHB winner of the whole profile (sample size equal to ``n``)."""
    from .chb import chb_winner, table_from_profile

    return chb_winner(table_from_profile(profile), chb)


def policy_window_profile() -> Profile:
    """Three-candidate, 101-voter profile with a distinct Borda and plurality winner.

    40 x [0, 1, 2], 35 x [1, 0, 2], 26 x [2, 1, 0].  Aggregates: first places
    (40, 35, 26); Borda (115, 136, 52).
    """
    blocks = [((0, 1, 2), 40), ((1, 0, 2), 35), ((2, 1, 0), 26)]
    return Profile([order for order, count in blocks for _ in range(count)])
