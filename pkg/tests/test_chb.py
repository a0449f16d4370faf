from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snowveil.chb import (
    ChbParams,
    ScoreTable,
    chb_stage,
    chb_winner,
    chb_winners,
    hybrid_score,
    min_hybrid_delta,
    popularity_threshold,
    score_sample,
)
from snowveil.preferences import AbstractBallot, FullBallot, ParameterError

from oracles import ref_chb, ref_chb_from_scores, ref_scores

POLICY_WINDOW = dict(borda=[115, 136, 52], first_place=[40, 35, 26], sample_size=101)


def policy_window_table():
    return ScoreTable.from_scores(**POLICY_WINDOW)


def test_score_single_full_ballot():
    t = score_sample([[1, 0, 2]], 3)
    assert t.borda == (1, 2, 0) and t.first_place == (0, 1, 0)


def test_score_two_opposed_ballots():
    t = score_sample([FullBallot((0, 1)), FullBallot((1, 0))], 2)
    assert t.borda == (1, 1) and t.first_place == (1, 1)


def test_score_abstract_ballot():
    t = score_sample([AbstractBallot(0)], 5)
    assert t.borda == (4, Fraction(3, 2), Fraction(3, 2), Fraction(3, 2), Fraction(3, 2))
    assert t.first_place == (1, 0, 0, 0, 0)
    assert sum(t.borda) == 10


def test_score_errors():
    with pytest.raises(ParameterError):
        score_sample([], 3)
    with pytest.raises(ParameterError):
        score_sample([[0, 1, 5]], 3)
    with pytest.raises(ParameterError):
        score_sample([AbstractBallot(4)], 3)


ballot_lists = st.integers(2, 6).flatmap(
    lambda m: st.tuples(
        st.just(m),
        st.lists(
            st.one_of(st.permutations(range(m)).map(list), st.integers(0, m - 1).map(lambda c: ("A", c))),
            min_size=1, max_size=15,
        ),
    )
)


def _to_package(b):
    return AbstractBallot(b[1]) if isinstance(b, tuple) else FullBallot(tuple(b))


@given(ballot_lists)
def test_score_table_invariants_and_oracle(data):
    m, ballots = data
    t = score_sample([_to_package(b) for b in ballots], m)
    borda, first = ref_scores(ballots, m)
    assert list(t.borda) == borda and list(t.first_place) == first
    k = len(ballots)
    assert sum(t.first_place) == k
    assert sum(t.borda) == Fraction(k * m * (m - 1), 2)
    assert all(0 <= b <= k * (m - 1) for b in t.borda)


fractions01 = st.sampled_from([0, 0.1, 0.2, 0.25, 0.3, 0.35, 0.5, 0.8, 0.9, 1])


@settings(max_examples=300)
@given(ballot_lists, fractions01, fractions01, fractions01)
def test_chb_matches_reference(data, alpha, beta, lam):
    m, ballots = data
    params = ChbParams(alpha, beta, lam)
    t = score_sample([_to_package(b) for b in ballots], m)
    assert chb_winner(t, params) == ref_chb(ballots, m, alpha, beta, lam)


def test_policy_window_alpha_035_beta_080_picks_plurality_winner():
    # C1 unpopular (35 < 36); C0 eligible (40 >= 36 and 115 >= 108.8)
    t = policy_window_table()
    p = ChbParams(alpha=0.35, beta=0.8, lam=0.5)
    assert chb_winner(t, p) == 0 and chb_stage(t, p) == "hybrid"


def test_policy_window_alpha_035_beta_090_defaults_to_borda_winner():
    t = policy_window_table()
    p = ChbParams(alpha=0.35, beta=0.9, lam=0.5)
    assert chb_winner(t, p) == 1 and chb_stage(t, p) == "default"


def test_policy_window_beta_boundary_is_exact():
    # beta = 115/136 exactly: 115 >= beta * 136 holds with equality
    t = policy_window_table()
    assert chb_winner(t, ChbParams(alpha=0.35, beta=Fraction(115, 136))) == 0
    assert chb_winner(t, ChbParams(alpha=0.35, beta=Fraction(115, 136) + Fraction(1, 10**6))) == 1


def test_single_ballot_top_wins():
    assert chb_winner(score_sample([[2, 0, 1]], 3), ChbParams(alpha=1, beta=1, lam=0.3)) == 2


def test_borda_tie_lowest_index_alpha_zero():
    t = ScoreTable.from_scores([5, 5], [1, 1], 2)
    assert chb_winner(t, ChbParams(alpha=0)) == 0


def test_popularity_threshold_exact():
    assert popularity_threshold(0.3, 10) == 3
    assert popularity_threshold(0.35, 101) == 36
    assert popularity_threshold(0.3, 101) == 31
    assert popularity_threshold(0, 10) == 0


def test_hybrid_score_examples():
    k, m = 10, 5
    full = ScoreTable((2 * k * (m - 1),) + (0,) * 4, (k, 0, 0, 0, 0), k, m)
    assert hybrid_score(full, 0, ChbParams(lam=0.3)) == 1
    assert hybrid_score(full, 1, ChbParams(lam=0.3)) == 0
    t = ScoreTable.from_scores([20, 5, 5, 5, 5], [4, 3, 1, 1, 1], 10)
    assert hybrid_score(t, 0, ChbParams(lam=0.5)) == Fraction(45, 100)


@given(ballot_lists, fractions01)
def test_hybrid_score_in_unit_interval(data, lam):
    m, ballots = data
    t = score_sample([_to_package(b) for b in ballots], m)
    for j in range(m):
        assert 0 <= hybrid_score(t, j, ChbParams(lam=lam)) <= 1


def test_min_hybrid_delta():
    assert min_hybrid_delta(10, 5, 0.5) == Fraction(1, 80)
    assert float(min_hybrid_delta(10, 5, 0.5)) == 0.0125
    assert min_hybrid_delta(1, 2, 0) == 1
    with pytest.raises(ParameterError):
        min_hybrid_delta(10, 5, 1)


def test_params_domain():
    for bad in (dict(alpha=-0.1), dict(beta=1.1), dict(lam=2)):
        with pytest.raises(ParameterError):
            ChbParams(**bad)


def test_batched_matches_scalar():
    rng = np.random.default_rng(3)
    borda2 = rng.integers(0, 40, size=(500, 4))
    first = rng.integers(0, 4, size=(500, 4))
    params = ChbParams(alpha=0.2, beta=0.7, lam=0.4)
    batch = chb_winners(borda2, first, 10, params)
    for row, w in zip(range(500), batch):
        borda = [Fraction(int(b), 2) for b in borda2[row]]
        assert w == ref_chb_from_scores(borda, first[row].tolist(), 10, 0.2, 0.7, 0.4)
