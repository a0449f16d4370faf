"""The twelve acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import math
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from snowveil.analysis.adversary import (
    CoalitionScenario,
    adversary_sweep,
    bury_profile,
    coalition_grid,
    coalition_order,
    expected_sample_margin,
    honest_pair,
    margin_electorate,
    minimal_coalition,
    per_voter_margin,
    sample_margins,
    voter_margins,
)
from snowveil.analysis.axioms import run_axiom_suite
from snowveil.analysis.bounds import block_electorate, bound_inputs, failure_probability_bound, misleading_sample_rate
from snowveil.chb import ChbParams, ScoreTable, chb_winner
from snowveil.protocol import ProtocolParams, run_single_winner
from snowveil.sim import ElectorateSpec, TrialConfig, run_trials, trial_seeds
from snowveil.voter_update import UpdateParams

from oracles import ref_chb_from_scores

BASELINE = TrialConfig(ElectorateSpec("ic", 100, 5), ProtocolParams(), trials=100, base_seed=0)


def baseline_rounds(quorum=0.67, trials=100, base_seed=0):
    """Yield ``(n, result)`` for seeded baseline single-winner rounds."""
    params = replace(BASELINE.protocol, quorum=quorum)
    for i in range(trials):
        e_seed, p_seed = trial_seeds(base_seed, i)
        profile = BASELINE.electorate.generate(e_seed)
        yield profile.n, run_single_winner(profile, None, params, np.random.default_rng(p_seed))


def stats_for(config):
    _, stats = run_trials(config)
    assert stats.excluded == 0
    return stats


@pytest.mark.acceptance(1, "axiom suite green in under a minute")
def test_criterion_01_axiom_suite():
    start = time.perf_counter()
    report = run_axiom_suite(cases=1000, seed=0)
    elapsed = time.perf_counter() - start
    by = {c.name: c for c in report.checks}
    assert by["determinism"].checked == 1000 and by["anonymity"].checked == 1000
    assert by["monotonicity"].checked == 10_000
    assert by["responsiveness_alpha"].checked >= 100 and by["fgr_hybrid"].checked >= 100
    assert elapsed < 60
    failures = {c.name: c.counterexample.to_text() for c in report.checks if not c.passed}
    assert not failures, failures


@pytest.mark.acceptance(2, "every lock raises the potential by 2N+1 and it stays in [0, n^2]")
def test_criterion_02_potential_exactness():
    violations = 0
    locks = 0
    for n, res in baseline_rounds():
        counts = {}
        prev = 0
        for _, phi, cand, prior in res.trace.events:
            if cand is None:
                counts, prev = {}, 0
                assert phi == 0
                continue
            locks += 1
            assert prior == counts.get(cand, 0)
            counts[cand] = prior + 1
            recomputed = sum(c * c for c in counts.values())
            if phi - prev != 2 * prior + 1 or phi != recomputed or not 0 <= phi <= n * n:
                violations += 1
            prev = phi
    assert locks > 0 and violations == 0


@pytest.mark.acceptance(3, "at most one candidate ever meets the quorum")
@pytest.mark.parametrize("quorum", [0.51, 0.67, 0.9])
def test_criterion_03_quorum_uniqueness(quorum):
    for n, res in baseline_rounds(quorum, trials=100, base_seed=3):
        thr = math.ceil(Fraction(str(quorum)) * n)
        counts = {}
        for _, _, cand, prior in res.trace.events:
            if cand is None:
                counts = {}
                continue
            counts[cand] = prior + 1
            assert sum(c >= thr for c in counts.values()) <= 1
        assert counts[res.winner] >= thr


@pytest.mark.acceptance(4, "100/100 baseline trials finish below the 200n cap in under two minutes")
def test_criterion_04_termination():
    start = time.perf_counter()
    results, stats = run_trials(BASELINE)
    elapsed = time.perf_counter() - start
    cap = BASELINE.protocol.cap_for(100)
    assert all(r.converged and r.convergence_time < cap for r in results)
    assert stats.trials == 100 and stats.excluded == 0
    print(f"stalls in {sum(r.stalls > 0 for r in results)} of 100 trials, {elapsed:.1f}s")
    assert elapsed < 120


def r_squared(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return 1 - (resid ** 2).sum() / ((y - y.mean()) ** 2).sum()


@pytest.mark.acceptance(5, "mean convergence time is linear in n (R^2 >= 0.95) for IC and polarised")
def test_criterion_05_linear_scaling():
    start = time.perf_counter()
    ns = [50, 100, 200, 400, 800]
    fits = {}
    for model in ("ic", "polarised"):
        means = [stats_for(TrialConfig(ElectorateSpec(model, n, 5), trials=50, base_seed=0)).mean for n in ns]
        fits[model] = r_squared(ns, means)
    print(f"R^2 {fits}")
    assert all(r2 >= 0.95 for r2 in fits.values()), fits
    assert time.perf_counter() - start < 15 * 60


@pytest.mark.acceptance(6, "gamma=15 is faster than gamma=3 with disjoint 95% CIs")
def test_criterion_06_cautious_voter():
    def at(gamma):
        update = UpdateParams.coupled(gamma=gamma)
        return stats_for(replace(BASELINE, protocol=replace(BASELINE.protocol, update=update)))

    slow, fast = at(3), at(15)
    print(f"gamma=3 {slow.mean:.1f}+-{slow.ci95:.1f}, gamma=15 {fast.mean:.1f}+-{fast.ci95:.1f}")
    assert fast.mean < slow.mean
    assert fast.mean + fast.ci95 < slow.mean - slow.ci95


@pytest.mark.acceptance(7, "mean time rises with Q and the last step is the largest")
def test_criterion_07_quorum_superlinear():
    qs = [0.55, 0.67, 0.8, 0.95]
    means = [stats_for(replace(BASELINE, protocol=replace(BASELINE.protocol, quorum=q))).mean for q in qs]
    steps = np.diff(means)
    print(f"means {means}")
    assert np.all(steps > 0)
    assert steps[-1] == steps.max()


@pytest.mark.acceptance(8, "lambda leaves polarised convergence time unchanged (CIs overlap)")
def test_criterion_08_lambda_robustness():
    cfg = replace(BASELINE, electorate=ElectorateSpec("polarised", 100, 5))
    intervals = []
    for lam in (0, 0.25, 0.5, 0.75, 1):
        s = stats_for(replace(cfg, protocol=replace(cfg.protocol, chb=ChbParams(lam=lam))))
        intervals.append((s.mean - s.ci95, s.mean + s.ci95))
    print(f"intervals {intervals}")
    assert max(lo for lo, _ in intervals) <= min(hi for _, hi in intervals)


@pytest.mark.acceptance(9, "policy-window heatmap matches direct rule evaluation cell by cell")
def test_criterion_09_policy_window():
    table = ScoreTable.from_scores([115, 136, 52], [40, 35, 26], 101)
    a1, a2, b1 = Fraction(35, 101), Fraction(40, 101), Fraction(115, 136)
    alphas = sorted({Fraction(i, 100) for i in range(0, 51)} | {Fraction(i, 101) for i in range(0, 41)}
                    | {a1, a2, a1 + Fraction(1, 10**6)})
    betas = sorted({Fraction(i, 100) for i in range(50, 101)} | {b1, b1 + Fraction(1, 10**6)})
    cells = 0
    for alpha in alphas:
        for beta in betas:
            w = chb_winner(table, ChbParams(alpha, beta, 0.5))
            assert w == ref_chb_from_scores([115, 136, 52], [40, 35, 26], 101, alpha, beta, 0.5)
            if alpha <= a1:
                assert w == 1, (alpha, beta)
            elif alpha <= a2:
                assert w == (0 if beta <= b1 else 1), (alpha, beta)
            cells += 1
    assert cells > 2000


@pytest.mark.acceptance(10, "adversary margin identity, Monte Carlo match, monotone win rate")
def test_criterion_10_adversary():
    # exact zero of the expected margin at c/n = delta/(delta+m-1)
    grid = [(m, d) for m in (2, 3, 5, 10) for d in map(Fraction, ("1/2", "1", "3/2", "2", "5/2"))]
    assert len(grid) == 20
    for m, delta in grid:
        ratio = delta / (delta + m - 1)
        n = ratio.denominator * 4
        c = ratio * n
        assert c.denominator == 1 and minimal_coalition(n, m, delta) == c
        assert expected_sample_margin(CoalitionScenario(n, int(c), m, delta, 10)) == 0

    profile = margin_electorate(100, 5, lead=0.5, seed=0)
    p_star, p_c = honest_pair(profile, ChbParams())
    order = coalition_order(profile, p_c, seed=1)
    c_min = minimal_coalition(100, 5, per_voter_margin(profile, p_star, p_c))
    rng = np.random.default_rng(2)
    for c in coalition_grid(100, c_min):
        if c == 100:
            continue
        attacked = bury_profile(profile, order[:c], p_c, p_star)
        delta = per_voter_margin(profile, p_star, p_c, order[c:])
        expected = float(expected_sample_margin(CoalitionScenario(100, c, 5, delta, 10)))
        draws = sample_margins(voter_margins(attacked, p_star, p_c), 10, 100_000, rng)
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws.mean() - expected) <= 3 * se, (c, draws.mean(), expected, se)

    rows = adversary_sweep(profile, p_star, p_c, ProtocolParams(), trials=100, base_seed=0)
    rates = [r.win_rate for r in rows]
    print(f"win rates by c {[(r.c, r.win_rate) for r in rows]}")
    assert all(b <= a for a, b in zip(rates, rates[1:]))


@pytest.mark.acceptance(11, "misleading-sample rates stay under the union bound")
def test_criterion_11_concentration():
    chb = ChbParams()
    rng = np.random.default_rng(0)
    for m in (3, 5):
        for lead in (Fraction(3, 5), Fraction(4, 5)):
            e = block_electorate(m, lead)
            for k in (8, 16, 32, 64):
                bound = failure_probability_bound(bound_inputs(e, 0, k, chb.alpha)).union
                r = misleading_sample_rate(e, 0, k, chb, 100_000, rng=rng)
                assert r.wrong_winner <= r.failure_event <= bound, (m, lead, k, r, bound)


@pytest.mark.acceptance(12, "accuracy is 1.0 on a unanimous-first electorate")
def test_criterion_12_accuracy():
    _, stats = run_trials(replace(BASELINE, electorate=ElectorateSpec("unanimous_first", 100, 5, top=3)))
    assert stats.excluded == 0 and stats.accuracy == 1.0
