"""
The policy window on a three-way race
======================================

101 voters: 40 put C0 first, 35 put C1 first, 26 put C2 first.  C1 has the
most Borda points (136 against 115), yet C0 has more first places.  Sliding
the popularity filter alpha and the consensus filter beta decides which of
the two wins.
"""

from fractions import Fraction

from snowveil.chb import ChbParams, chb_stage, chb_winner, table_from_profile
from snowveil.preferences import policy_window_profile

table = table_from_profile(policy_window_profile())
print("Borda:", [float(b) for b in table.borda], "first places:", list(table.first_place))

alphas = [Fraction(a, 100) for a in range(30, 45, 2)]
betas = [Fraction(b, 100) for b in range(75, 96, 5)]

print("alpha\\beta " + " ".join(f"{float(b):>5.2f}" for b in betas))
for a in alphas:
    cells = []
    for b in betas:
        p = ChbParams(a, b, 0.5)
        cells.append(f"C{chb_winner(table, p)}{chb_stage(table, p)[0]}")
    print(f"{float(a):>10.2f} " + " ".join(f"{c:>5}" for c in cells))

print("\nstage letters: p = popular Borda winner, h = hybrid, d = default fallback")
print("C1 stops being popular above alpha = 35/101 =", round(35 / 101, 4))
print("C0 clears the consensus filter up to beta = 115/136 =", round(115 / 136, 4))
