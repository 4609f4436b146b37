"""
Why swap states between temperatures
====================================

A two-mode target with modes at -4 and +4 separated by a deep valley.  A
random-walk chain started in one mode never leaves it.  Paired with a hot
replica that crosses freely, and exchanging states every second step, the
cold chain visits both modes.
"""

import numpy as np

from bayes_gcnn.proposals import ProposalConfig
from bayes_gcnn.targets import GaussianMixture1D
from bayes_gcnn.tempering import RunConfig, build_ladder, coordinate

target = GaussianMixture1D(mu=4.0, sd=0.5, start=-4.0)
print("ladder for 4 replicas, T_max 60:", np.round(build_ladder(4, 60.0), 2))


def cold_chain(swap_interval):
    cfg = RunConfig(replicas=4, max_samples=4 * 20_000, t_max=60.0, swap_interval=swap_interval,
                    switch_fraction=0.99, proposal=ProposalConfig(kind="random_walk", rw_std=1.0),
                    seed=3, track=(0,), keep_samples=False)
    res = coordinate(target, cfg, backend="serial")
    return res, res.chains[0].tracked[0][: cfg.switch_index]


# %%
for label, interval in (("no swaps", 10**9), ("swap every 2 steps", 2)):
    res, x = cold_chain(interval)
    print(f"{label:20s} share of cold samples in the right-hand mode: {np.mean(x > 0):.3f}")
    if res.swaps_attempted:
        rates = 100 * res.pair_accepted / res.pair_attempted
        print("  accepted swaps per adjacent pair (%):", np.round(rates, 1))

# %%
# Text histogram of the cold chain with swaps.
counts, edges = np.histogram(x, bins=24, range=(-6, 6))
for c, lo in zip(counts, edges):
    print(f"{lo:5.1f} {'#' * int(60 * c / counts.max())}")
