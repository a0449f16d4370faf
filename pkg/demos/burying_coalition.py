"""
How many buriers does it take?
===============================

A coalition ranks its favourite first and the honest winner last.  The
expected sample margin of the honest winner crosses zero at
c = n delta / (delta + m - 1); simulated win rates collapse around there.
"""

from snowveil import ProtocolParams
from snowveil.analysis.adversary import (
    CoalitionScenario,
    adversary_sweep,
    expected_sample_margin,
    honest_pair,
    margin_electorate,
    minimal_coalition,
    per_voter_margin,
)
from snowveil.chb import ChbParams

# closed form first
for c in (0, 10, 20, 30):
    sc = CoalitionScenario(n=100, c=c, m=5, delta=1, k=10)
    print(f"c={c:>2}: expected sample margin {float(expected_sample_margin(sc)):+.1f}")

profile = margin_electorate(100, 5, lead=0.5, seed=0)
p_star, p_c = honest_pair(profile, ChbParams())
delta = per_voter_margin(profile, p_star, p_c)
print(f"\nhonest winner {p_star}, target {p_c}, delta = {delta} ({float(delta):.2f})")
print("smallest coalition that cancels the margin:", minimal_coalition(100, 5, delta))

for row in adversary_sweep(profile, p_star, p_c, ProtocolParams(), trials=30, base_seed=0):
    bar = "#" * round(30 * row.win_rate)
    print(f"c={row.c:>3} margin {float(row.expected_margin):+6.1f}  {bar}")
