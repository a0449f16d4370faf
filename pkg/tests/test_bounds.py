import math
from fractions import Fraction

import numpy as np
import pytest

from snowveil.analysis.bounds import (
    FailureBoundInputs,
    block_electorate,
    bound_inputs,
    failure_probability_bound,
    misleading_sample_rate,
)
from snowveil.chb import ChbParams
from snowveil.preferences import ParameterError


def test_k_zero_every_bound_is_one():
    b = failure_probability_bound(FailureBoundInputs(0, 4, (0.3, 0.5, 1.0), 0.2))
    assert b.per_competitor == (1.0, 1.0, 1.0) and b.plurality == 1.0 and b.union == 1.0


def test_plurality_bound_example():
    b = failure_probability_bound(FailureBoundInputs(10, 3, (1.0, 1.0), 0.5))
    assert b.plurality == pytest.approx(math.exp(-5)) and round(b.plurality, 5) == 0.00674


def test_competitor_bound_and_clamp():
    b = failure_probability_bound(FailureBoundInputs(32, 5, (1.0,) * 4, 0.9))
    assert all(p == pytest.approx(math.exp(-1)) for p in b.per_competitor)
    assert 5 * math.exp(-1) > 1 and b.union == 1.0


def test_union_formula():
    b = failure_probability_bound(FailureBoundInputs(64, 3, (1.2, 0.8), 0.3))
    c_min = min(2 * 0.3 ** 2, 0.8 ** 2 / 8)
    assert b.c_min == pytest.approx(c_min)
    assert b.union == pytest.approx(min(1, 3 * math.exp(-c_min * 64)))
    assert b.union_sum <= b.union + 1e-12


@pytest.mark.parametrize("bad", [dict(delta_j=(0.0,)), dict(delta_alpha=-0.1), dict(delta_j=())])
def test_non_positive_margins_rejected(bad):
    kw = dict(k=10, m=3, delta_j=(0.5,), delta_alpha=0.2) | bad
    with pytest.raises(ParameterError):
        FailureBoundInputs(**kw)


def test_block_electorate_margins_exact():
    e = block_electorate(3, Fraction(3, 5))
    deltas, mu = e.margins(0)
    # oracle: materialise 5 voters and average by hand
    rows = e.to_profile(5).ballots.tolist()
    for j in (1, 2):
        hand = Fraction(sum(r.index(j) - r.index(0) for r in rows), 5)
        assert deltas[j] == hand
    assert mu == Fraction(3, 5)
    assert sum(e.weights) == 1


def test_wrong_winner_inside_failure_event():
    e = block_electorate(4, Fraction(1, 2))
    r = misleading_sample_rate(e, 0, 8, ChbParams(), 20_000, rng=np.random.default_rng(0))
    assert 0 <= r.wrong_winner <= r.failure_event <= 1


def test_rates_below_bound_small():
    e = block_electorate(3, Fraction(4, 5))
    chb = ChbParams()
    for k in (8, 32):
        bound = failure_probability_bound(bound_inputs(e, 0, k, chb.alpha)).union
        r = misleading_sample_rate(e, 0, k, chb, 20_000, rng=np.random.default_rng(k))
        assert r.failure_event <= bound
