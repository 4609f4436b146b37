"""
Random-walk and Langevin proposals on a known target
====================================================

The three kernels share the form theta* ~ N(theta + drift, rw_std^2 I).
On a correlated 2D Gaussian we can check their answers exactly.
"""

import numpy as np

from bayes_gcnn.proposals import AdamMoments, ProposalConfig, adapt_step, propose_lg
from bayes_gcnn.targets import GaussianTarget
from bayes_gcnn.tempering import RunConfig, run_replica

mean = np.array([1.0, -0.5])
cov = np.array([[1.0, 0.6], [0.6, 0.5]])
target = GaussianTarget(mean, cov, init_scale=2.0)

# %%
# One Langevin proposal by hand.  The gradient shifts the mean, so the
# forward and reverse densities differ and the q-ratio is not zero.
cfg = ProposalConfig(kind="lg", lr=0.1, rw_std=0.8, q_ratio="exact")
prop, _ = propose_lg(np.array([3.0, 2.0]), target.grad, cfg, AdamMoments.zeros(2), np.random.default_rng(0))
print("theta* =", prop.theta_star, " log q-ratio =", round(prop.log_q_ratio, 4))

# %%
# The adaptive kernel replaces lr * grad by a bias-corrected Adam direction.
# With a constant gradient the step size settles at lr per coordinate.
mom = AdamMoments.zeros(2)
for _ in range(500):
    direction, mom = adapt_step(np.array([4.0, -0.1]), mom, lr=0.01)
print("adaptive direction after 500 constant-gradient steps:", direction)

# %%
# Single chains with each kernel.  All three recover mean and covariance;
# they differ in how quickly they mix.
for kind, kw in [("random_walk", {}), ("lg", {"lr": 0.1}), ("adapt_lg", {"lr": 0.05})]:
    pc = ProposalConfig(kind=kind, rw_std=0.8, lg_rate=0.5, q_ratio="exact", **kw)
    chain = run_replica(target, RunConfig(replicas=1, max_samples=40_000, switch_fraction=0.1,
                                          proposal=pc, track=(0, 1), keep_samples=False), seed=1)
    s = chain.switch_index
    x = np.column_stack([chain.tracked[0][s:], chain.tracked[1][s:]])
    acc = 100 * chain.accepted.mean()
    print(f"{kind:12s} accept {acc:5.1f}%  mean {np.round(x.mean(0), 3)}  cov {np.round(np.cov(x.T).ravel(), 3)}")
print("truth" + " " * 22 + f"mean {mean}  cov {cov.ravel()}")
