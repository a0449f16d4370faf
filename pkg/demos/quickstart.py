"""
Quickstart: one electorate, one round, one batch
=================================================

Draw an impartial-culture electorate, run a single rank-round of the
protocol, then a seeded batch of trials.
"""

import numpy as np

from snowveil import ProtocolParams, canonical_winner, generate_impartial_culture, run_single_winner
from snowveil.sim import ElectorateSpec, TrialConfig, run_trials

profile = generate_impartial_culture(100, 5, seed=1)
params = ProtocolParams()
print("rule applied to all 100 ballots:", canonical_winner(profile, params.chb))

res = run_single_winner(profile, None, params, np.random.default_rng(1))
print(f"protocol winner {res.winner} after {res.activations} updates "
      f"({res.locks} locks, {res.no_locks} abstentions, {res.stalls} stalls)")

# the potential only ever climbs, except when a stall resets everyone
phis = [phi for _, phi in res.trace.values]
print("potential at the last five locks:", phis[-5:])

# a batch; trial i depends only on (base_seed, i)
config = TrialConfig(ElectorateSpec("ic", 100, 5), params, trials=20, base_seed=0)
results, stats = run_trials(config)
print(f"mean time {stats.mean:.1f} +- {stats.ci95:.1f}, accuracy {stats.accuracy:.2f}")

