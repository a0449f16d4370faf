"""
Sweep plots
============

Reproduces the convergence-time shapes: the cautious-voter paradox in gamma,
the super-linear cost of a larger quorum, and linear scaling in n.  Needs
matplotlib.  Writes PNGs to the current directory.
"""

from dataclasses import replace

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from snowveil import ProtocolParams
from snowveil.sim import ElectorateSpec, TrialConfig, run_trials
from snowveil.voter_update import UpdateParams

TRIALS = 30
base = TrialConfig(ElectorateSpec("ic", 100, 5), ProtocolParams(), trials=TRIALS, base_seed=0)


def curve(configs):
    stats = [run_trials(c)[1] for c in configs]
    return [s.mean for s in stats], [s.ci95 for s in stats]


def errorbar(ax, xs, ys, err, label=None):
    ax.errorbar(xs, ys, yerr=err, marker="o", capsize=3, label=label)


fig, axes = plt.subplots(1, 3, figsize=(13, 3.8))

gammas = [3, 5, 7, 10, 15]
ys, err = curve([replace(base, protocol=replace(base.protocol, update=UpdateParams.coupled(gamma=g)))
                 for g in gammas])
errorbar(axes[0], gammas, ys, err)
axes[0].set(xlabel="gamma (rounds per update)", ylabel="updates to quorum", title="more rounds, faster")

qs = [0.55, 0.67, 0.8, 0.9, 0.95]
ys, err = curve([replace(base, protocol=replace(base.protocol, quorum=q)) for q in qs])
errorbar(axes[1], qs, ys, err)
axes[1].set(xlabel="quorum Q", title="quorum cost")

ns = [50, 100, 200, 400]
for model in ("ic", "polarised"):
    ys, err = curve([replace(base, electorate=ElectorateSpec(model, n, 5)) for n in ns])
    errorbar(axes[2], ns, ys, err, label=model)
axes[2].set(xlabel="voters n", title="scaling")
axes[2].legend()

fig.tight_layout()
fig.savefig("sweeps.png", dpi=120)
print("wrote sweeps.png")
