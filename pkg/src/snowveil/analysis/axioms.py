"""Axiom oracles for the CHB rule: determinism, anonymity, monotonicity and
responsiveness.

Rules are passed around in their batched form, ``rule(borda2, first, k, params)``
with ``(R, m)`` score arrays, so a deliberately broken variant can be swapped in
to check that the suite actually notices.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .._rational import as_fraction
from ..chb import ChbParams, chb_stage, chb_winners, popularity_threshold, score_sample, table_from_profile
from ..preferences import ParameterError, Profile, borda_matrix

BatchRule = Callable[[np.ndarray, np.ndarray, int, ChbParams], np.ndarray]


class PreconditionError(ValueError):
    """The requested check is outside the axiom's contract."""


class ConstructionError(ValueError):
    """No tipping profile exists for the requested parameters under this builder."""


def chb_highest_index(borda2, first, k: int, params: ChbParams) -> np.ndarray:
    """Mutant rule: CHB with every tie going to the highest index instead of the lowest."""
    borda2 = np.atleast_2d(np.asarray(borda2))
    first = np.atleast_2d(np.asarray(first))
    m = borda2.shape[1]
    return m - 1 - chb_winners(borda2[:, ::-1], first[:, ::-1], k, params)


RULES: dict[str, BatchRule] = {"chb": chb_winners, "highest-index": chb_highest_index}


def _scores(ballots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Doubled Borda and first-place counts of a ``(..., k, m)`` ballot array."""
    ballots = np.asarray(ballots)
    m = ballots.shape[-1]
    flat = ballots.reshape(-1, m)
    pts = borda_matrix(flat).reshape(ballots.shape)
    first = (ballots[..., 0:1] == np.arange(m)).astype(np.int64)
    return 2 * pts.sum(axis=-2), first.sum(axis=-2)


def profile_winner(profile: Profile, params: ChbParams, rule: BatchRule = chb_winners) -> int:
    borda2, first = _scores(profile.ballots)
    return int(rule(borda2[None], first[None], profile.n, params)[0])


# -- improvements -----------------------------------------------------------


class ImprovementKind(str, enum.Enum):
    MOVE_TO_TOP = "move_to_top"
    ADJACENT_SWAP_UP = "adjacent_swap_up"


@dataclass(frozen=True)
class Improvement:
    """Raise ``candidate`` on ``voter``'s ballot, leaving everyone else's relative order intact."""

    voter: int
    kind: ImprovementKind
    candidate: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ImprovementKind(self.kind))

    def apply(self, ranking: Sequence[int]) -> tuple[int, ...]:
        order = [int(c) for c in ranking]
        if self.candidate not in order:
            raise PreconditionError(f"candidate {self.candidate} is not on the ballot")
        pos = order.index(self.candidate)
        if pos == 0:
            raise PreconditionError(f"candidate {self.candidate} is already ranked first")
        if self.kind is ImprovementKind.MOVE_TO_TOP:
            return (self.candidate,) + tuple(order[:pos] + order[pos + 1:])
        order[pos - 1], order[pos] = order[pos], order[pos - 1]
        return tuple(order)

    def __str__(self) -> str:
        return f"voter {self.voter} {self.kind.value} {self.candidate}"


def apply_improvement(profile: Profile, imp: Improvement) -> Profile:
    if not 0 <= imp.voter < profile.n:
        raise PreconditionError(f"voter {imp.voter} out of range")
    ballots = profile.ballots.copy()
    ballots[imp.voter] = imp.apply(profile[imp.voter])
    return Profile(ballots)


def winner_improvements(profile: Profile, candidate: int) -> list[Improvement]:
    """Every single-ballot improvement of ``candidate`` (both kinds)."""
    out = []
    for v in range(profile.n):
        if profile.ballots[v, 0] == candidate:
            continue
        out.append(Improvement(v, ImprovementKind.MOVE_TO_TOP, candidate))
        out.append(Improvement(v, ImprovementKind.ADJACENT_SWAP_UP, candidate))
    return out


def random_improvement(profile: Profile, candidate: int, rng: np.random.Generator) -> Optional[Improvement]:
    voters = np.flatnonzero(profile.ballots[:, 0] != candidate)
    if len(voters) == 0:
        return None
    kind = ImprovementKind.MOVE_TO_TOP if rng.random() < 0.5 else ImprovementKind.ADJACENT_SWAP_UP
    return Improvement(int(rng.choice(voters)), kind, candidate)


@dataclass
class Counterexample:
    check: str
    profile: Optional[Profile]
    detail: str
    improvement: Optional[Improvement] = None

    def to_text(self) -> str:
        """The offending profile in the standard text format, annotated with comments."""
        head = [f"# check: {self.check}", f"# {self.detail}"]
        if self.improvement is not None:
            head.append(f"# improvement: {self.improvement}")
        body = self.profile.to_text() if self.profile is not None else ""
        return "\n".join(head) + "\n" + body


def check_improvement(profile: Profile, imp: Improvement, params: ChbParams,
                      rule: BatchRule = chb_winners) -> Optional[Counterexample]:
    """Apply one improvement of the current winner and report if the winner changed."""
    before = profile_winner(profile, params, rule)
    if imp.candidate != before:
        raise PreconditionError(
            f"improvement raises candidate {imp.candidate}, but the winner is {before}"
        )
    after = profile_winner(apply_improvement(profile, imp), params, rule)
    if after != before:
        return Counterexample("monotonicity", profile, f"winner {before} became {after}", imp)
    return None


def check_monotonicity(profiles: Iterable[Profile], params: ChbParams, rule: BatchRule = chb_winners,
                       samples: int = 1, enumerate_limit: int = 100,
                       rng: Optional[np.random.Generator] = None) -> Optional[Counterexample]:
    """First monotonicity violation over ``profiles``, or ``None``.

    Small profiles (``k * m <= enumerate_limit``) have every winner-improvement
    checked; larger ones get ``samples`` random improvements each.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for profile in profiles:
        w = profile_winner(profile, params, rule)
        if profile.n * profile.m <= enumerate_limit:
            imps = winner_improvements(profile, w)
        else:
            imps = [i for i in (random_improvement(profile, w, rng) for _ in range(samples)) if i]
        if not imps:
            continue
        base = profile.ballots
        borda2, first = _scores(base)
        old_rows = 2 * borda_matrix(base[[i.voter for i in imps]])
        new_ballots = np.array([i.apply(base[i.voter]) for i in imps])
        new_rows = 2 * borda_matrix(new_ballots)
        b2 = borda2 + new_rows - old_rows
        f = np.tile(first, (len(imps), 1))
        f[np.arange(len(imps)), base[[i.voter for i in imps], 0]] -= 1
        f[np.arange(len(imps)), new_ballots[:, 0]] += 1
        after = rule(b2, f, profile.n, params)
        bad = np.flatnonzero(after != w)
        if len(bad):
            i = int(bad[0])
            return Counterexample("monotonicity", profile, f"winner {w} became {int(after[i])}", imps[i])
    return None


# -- tipping-point constructions --------------------------------------------


class TippingCase(str, enum.Enum):
    ALPHA_FLIP = "alpha_flip"
    HYBRID_FLIP = "hybrid_flip"


def _alpha_flip_candidates(j: int, k: int, m: int, thr: int) -> Iterator[tuple[list, Improvement]]:
    # j: Borda winner one first place short of popular; q: popular rival
    # close enough in Borda to be eligible.  Moving j to the top of one ballot
    # makes j the popular Borda winner.
    if 2 * thr - 1 > k:
        return
    others = [c for c in range(m) if c != j]
    for q in others:
        rest = [c for c in others if c != q]
        for t_q in sorted(range(thr, k - thr + 2), key=lambda t: (abs(k - 2 * t), t)):
            r = k - (thr - 1) - t_q
            ballots = [[j, q, *rest] for _ in range(thr - 1)]
            ballots += [[q, j, *rest] for _ in range(t_q)]
            for i in range(r):
                spun = rest[i % len(rest):] + rest[:i % len(rest)]
                ballots.append([spun[0], j, q, *spun[1:]])
            yield ballots, Improvement(thr - 1, ImprovementKind.MOVE_TO_TOP, j)


def _hybrid_flip_candidates(j: int, k: int, m: int, thr: int) -> Iterator[tuple[list, Improvement]]:
    # x: unpopular Borda winner sitting second on most ballots, which forces
    # the hybrid stage.  j and q are both popular and eligible with equal
    # first places, so their hybrid order is their Borda order.  j trails by
    # at most one point; one adjacent swap below the top flips it.
    others = [c for c in range(m) if c != j]
    for q in others:
        for x in (c for c in others if c != q):
            rest = [c for c in others if c not in (q, x)]
            for t in range(thr, k // 2 + 1):
                for t_x in range(min(thr - 1, k - 2 * t), -1, -1):
                    s = k - 2 * t - t_x
                    if s > len(rest) * (thr - 1):
                        continue
                    o_tops = [rest[i % len(rest)] for i in range(s)] if s else []
                    for demote in ((True, False) if rest else (False,)):
                        for a in range(t_x + 1):
                            for b in range(s + 1):
                                yield _hybrid_ballots(j, q, x, rest, t, t_x, o_tops, a, b, demote)


def _hybrid_ballots(j, q, x, rest, t, t_x, o_tops, a, b, demote):
    ballots = [[j, x, q, *rest] for _ in range(t)]
    q_start = len(ballots)
    ballots += [[q, x, j, *rest] for _ in range(t)]
    ballots += [[x, j, q, *rest] if i < a else [x, q, j, *rest] for i in range(t_x)]
    for i, o in enumerate(o_tops):
        tail = [c for c in rest if c != o]
        ballots.append([o, x, j, q, *tail] if i < b else [o, x, q, j, *tail])
    if demote:
        # j drops one slot below an outsider on a q-ballot; the swap undoes it
        ballots[q_start] = [q, x, rest[0], j, *rest[1:]]
    return ballots, Improvement(q_start, ImprovementKind.ADJACENT_SWAP_UP, j)


def _verify_tipping(profile: Profile, imp: Improvement, j: int, params: ChbParams, case: TippingCase) -> bool:
    table = table_from_profile(profile)
    before = profile_winner(profile, params)
    if before == j:
        return False
    after_profile = apply_improvement(profile, imp)
    if profile_winner(after_profile, params) != j:
        return False
    thr = popularity_threshold(params.alpha, profile.n)
    bstar = int(np.argmax(table.borda2))
    if case is TippingCase.ALPHA_FLIP:
        return bstar == j and table.first_place[j] == thr - 1
    # the swap must not touch first places, and j must already have been eligible
    after = table_from_profile(after_profile)
    if after.first_place != table.first_place:
        return False
    if after.borda2[j] - table.borda2[j] != 2:
        return False
    beta = as_fraction(params.beta)
    beta_ok = table.borda2[j] * beta.denominator >= beta.numerator * table.borda2[bstar]
    return chb_stage(table, params) == "hybrid" and table.first_place[j] >= thr and beta_ok


def build_pr_tipping_profile(target: int, case, k: int, m: int,
                             params: ChbParams) -> tuple[Profile, Improvement]:
    """A ``k``-ballot profile the target loses, plus one target-improvement that makes it win.

    ``alpha_flip``: the target is the Borda winner with one first place too few
    to be popular; moving it to the top of one ballot settles step 1.

    ``hybrid_flip``: an unpopular Borda winner forces the hybrid stage, where
    the target trails a rival by less than one Borda point's worth of hybrid
    score; a single adjacent swap (not into first place) flips the result.
    """
    case = TippingCase(case)
    if m < 3:
        raise ConstructionError("tipping profiles need at least three candidates")
    if k < m:
        raise ConstructionError(f"need k >= m, got k={k}, m={m}")
    if not 0 <= target < m:
        raise ParameterError(f"target {target} out of range 0..{m - 1}")
    thr = popularity_threshold(params.alpha, k)
    if thr < 1:
        raise ConstructionError("alpha = 0 makes every candidate popular; step 1 always decides")
    if case is TippingCase.HYBRID_FLIP:
        if as_fraction(params.lam) >= 1:
            raise ConstructionError("lambda = 1 ignores Borda scores, so a one-point swap cannot move the hybrid score")
        gen = _hybrid_flip_candidates(target, k, m, thr)
    else:
        gen = _alpha_flip_candidates(target, k, m, thr)
    for ballots, imp in gen:
        profile = Profile(ballots)
        if _verify_tipping(profile, imp, target, params, case):
            return profile, imp
    raise ConstructionError(f"no {case.value} profile for target={target}, k={k}, m={m}, {params}")


# -- golden tie cases and the suite -----------------------------------------


@dataclass(frozen=True)
class TieCase:
    name: str
    borda2: tuple[int, ...]
    first_place: tuple[int, ...]
    k: int
    params: ChbParams
    winner: int


def load_tie_cases(path=None) -> list[TieCase]:
    if path is None:
        text = resources.files("snowveil.data").joinpath("tie_cases.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    cases = []
    for c in json.loads(text):
        cases.append(TieCase(
            c["name"], tuple(2 * b for b in c["borda"]), tuple(c["first_place"]), c["k"],
            ChbParams(c["alpha"], c["beta"], c["lambda"]), c["winner"],
        ))
    return cases


@dataclass
class CheckResult:
    name: str
    checked: int
    counterexample: Optional[Counterexample] = None
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.counterexample is None


@dataclass
class AxiomReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self) -> Optional[CheckResult]:
        return next((c for c in self.checks if not c.passed), None)


def _random_samples(count: int, k: int, m: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(m), (count * k, 1)), axis=1).reshape(count, k, m)


def tipping_grid(case: TippingCase) -> Iterator[tuple[int, int, int, ChbParams]]:
    """Deterministic sweep of ``(target, k, m, params)`` used by the suite."""
    alphas = (0.1, 0.2, 0.3)
    betas = (0.5, 0.8, 0.9) if case is TippingCase.ALPHA_FLIP else (0.5, 0.7, 0.8)
    lams = (0.0, 0.25, 0.5, 0.75)
    for k in (10, 12, 15, 20, 24):
        for m in (3, 4, 5, 6):
            for alpha in alphas:
                for beta in betas:
                    for lam in lams:
                        for target in range(m):
                            yield target, k, m, ChbParams(alpha, beta, lam)


def run_axiom_suite(cases: int = 1000, seed: int = 0, rule: BatchRule = chb_winners,
                    params: ChbParams = ChbParams(), k: int = 10, m: int = 5,
                    tie_cases: Optional[list[TieCase]] = None) -> AxiomReport:
    """Run every axiom check and collect the first counterexample of each.

    ``cases`` sets the determinism and anonymity sample counts; monotonicity
    gets ten times as many improvements, and each tipping construction
    ``cases // 10`` instances (at least ten).
    """
    if cases < 1:
        raise ParameterError("cases must be positive")
    rng = np.random.default_rng(seed)
    report = AxiomReport()

    samples = _random_samples(cases, k, m, rng)
    b2, f = _scores(samples)
    first = rule(b2, f, k, params)
    again = rule(b2.copy(), f.copy(), k, params)
    res = CheckResult("determinism", cases)
    bad = np.flatnonzero(first != again)
    if len(bad):
        i = int(bad[0])
        res.counterexample = Counterexample("determinism", Profile(samples[i]), f"winners {first[i]} and {again[i]}")
    report.checks.append(res)

    res = CheckResult("anonymity", cases)
    for i in range(cases):
        shuffled = samples[i][rng.permutation(k)]
        table = score_sample(shuffled.tolist(), m)
        w = int(rule(np.array([table.borda2]), np.array([table.first_place]), k, params)[0])
        if w != first[i]:
            res.counterexample = Counterexample("anonymity", Profile(samples[i]), f"winner {first[i]} became {w} after reordering")
            break
    report.checks.append(res)

    mono_n = 10 * cases
    profiles = (Profile(p) for p in _random_samples(mono_n, k, m, rng))
    cx = check_monotonicity(profiles, params, rule, samples=1, enumerate_limit=0, rng=rng)
    report.checks.append(CheckResult("monotonicity", mono_n, cx))

    per_case = max(10, cases // 10)
    for case, label in ((TippingCase.ALPHA_FLIP, "responsiveness_alpha"), (TippingCase.HYBRID_FLIP, "fgr_hybrid")):
        res = CheckResult(label, 0)
        for target, kk, mm, p in tipping_grid(case):
            if res.checked >= per_case:
                break
            try:
                profile, imp = build_pr_tipping_profile(target, case, kk, mm, p)
            except ConstructionError:
                res.skipped += 1
                continue
            res.checked += 1
            before = profile_winner(profile, p, rule)
            after = profile_winner(apply_improvement(profile, imp), p, rule)
            if before == target or after != target:
                res.counterexample = Counterexample(
                    label, profile, f"target {target}: winner {before} -> {after} under {p}", imp)
                break
        if res.checked < per_case and res.passed:
            res.counterexample = Counterexample(label, None, f"only {res.checked} feasible instances")
        report.checks.append(res)

    tie_cases = load_tie_cases() if tie_cases is None else tie_cases
    res = CheckResult("golden_ties", len(tie_cases))
    for tc in tie_cases:
        w = int(rule(np.array([tc.borda2]), np.array([tc.first_place]), tc.k, tc.params)[0])
        if w != tc.winner:
            res.counterexample = Counterexample(
                "golden_ties", None,
                f"case {tc.name}: expected {tc.winner}, got {w}")
            break
    report.checks.append(res)
    return report
