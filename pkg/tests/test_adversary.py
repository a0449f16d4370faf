import math
from fractions import Fraction

import numpy as np
import pytest

from snowveil.analysis.adversary import (
    CoalitionScenario,
    adversary_sweep,
    bury,
    coalition_order,
    expected_sample_margin,
    honest_pair,
    margin_electorate,
    minimal_coalition,
    per_voter_margin,
    run_adversary_trial,
    sample_margins,
    voter_margins,
)
from snowveil.chb import ChbParams
from snowveil.preferences import ParameterError, generate_impartial_culture
from snowveil.protocol import ProtocolParams, run_single_winner

from oracles import ref_bury


def test_minimal_coalition_examples():
    assert minimal_coalition(100, 5, 1) == 20
    assert minimal_coalition(100, 2, 1) == 50
    assert minimal_coalition(1000, 10, 0.5) == 53
    with pytest.raises(ParameterError):
        minimal_coalition(100, 5, 0)


def test_expected_margin_examples():
    assert expected_sample_margin(CoalitionScenario(100, 20, 5, 1, 10)) == 0
    assert expected_sample_margin(CoalitionScenario(100, 0, 5, Fraction(3, 7), 10)) == Fraction(30, 7)
    assert expected_sample_margin(CoalitionScenario(100, 10, 5, 1, 10)) == 5


@pytest.mark.parametrize("bad", [dict(c=101), dict(delta=0), dict(m=1)])
def test_scenario_validation(bad):
    kw = dict(n=100, c=10, m=5, delta=1, k=10) | bad
    with pytest.raises(ParameterError):
        CoalitionScenario(**kw)


def test_margin_zero_at_threshold_grid():
    # c/n = delta/(delta+m-1) exactly: choose n as a multiple of the denominator
    for m in (2, 3, 5, 8):
        for delta in (Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(5, 3), Fraction(2)):
            ratio = delta / (delta + m - 1)
            n = ratio.denominator * 3
            c = ratio * n
            assert c.denominator == 1
            assert expected_sample_margin(CoalitionScenario(n, int(c), m, delta, 10)) == 0


def test_bury_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = rng.permutation(6).tolist()
        p_c, p_star = rng.choice(6, 2, replace=False).tolist()
        assert list(bury(r, p_c, p_star)) == ref_bury(r, p_c, p_star)
    with pytest.raises(ParameterError):
        bury([0, 1], 1, 1)


def test_empty_coalition_equals_honest_run():
    profile = generate_impartial_culture(50, 4, seed=1)
    params = ProtocolParams()
    out = run_adversary_trial(profile, [], 1, 0, params, np.random.default_rng(5))
    honest = run_single_winner(profile, None, params, np.random.default_rng(5))
    assert out.winner == honest.winner and out.activations == honest.activations


def test_full_coalition_elects_target():
    profile = generate_impartial_culture(40, 4, seed=2)
    out = run_adversary_trial(profile, range(40), 3, 0, ProtocolParams(), np.random.default_rng(0))
    assert out.winner == 3 and not out.p_star_won


def test_per_voter_margin_is_mean_of_differences():
    profile = generate_impartial_culture(30, 5, seed=4)
    d = voter_margins(profile, 0, 1)
    assert per_voter_margin(profile, 0, 1) == Fraction(int(d.sum()), 30)
    rows = profile.ballots.tolist()
    assert d.tolist() == [r.index(1) - r.index(0) for r in rows]


def test_sample_margin_mean_within_three_se():
    profile = margin_electorate(200, 5, lead=0.4, seed=3)
    p_star, p_c = 0, 1
    c = 15
    order = coalition_order(profile, p_c, seed=0)
    from snowveil.analysis.adversary import bury_profile
    attacked = bury_profile(profile, order[:c], p_c, p_star)
    delta = per_voter_margin(profile, p_star, p_c, order[c:])
    expected = expected_sample_margin(CoalitionScenario(200, c, 5, delta, 10))
    # the coalition reports p_c first and p_star last, so its margin is exactly -(m-1)
    assert set(voter_margins(attacked, p_star, p_c)[order[:c]].tolist()) == {-4}
    draws = sample_margins(voter_margins(attacked, p_star, p_c), 10, 100_000, np.random.default_rng(1))
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - float(expected)) <= 3 * se


def test_sub_threshold_coalition_rarely_wins():
    profile = margin_electorate(100, 5, lead=0.5, seed=0)
    p_star, p_c = honest_pair(profile, ChbParams())
    rows = adversary_sweep(profile, p_star, p_c, ProtocolParams(), trials=40, base_seed=0, sizes=[0, 5])
    assert all(r.win_rate >= 0.95 for r in rows)


def test_sweep_rejects_non_positive_margin():
    profile = generate_impartial_culture(30, 3, seed=0)
    p_star, p_c = honest_pair(profile, ChbParams())
    with pytest.raises(ParameterError):
        adversary_sweep(profile, p_c, p_star, ProtocolParams(), 1, 0, sizes=[0])
