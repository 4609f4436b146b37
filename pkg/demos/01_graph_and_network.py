"""
A graph convolutional network as a flat parameter vector
========================================================

Build a Cora-sized synthetic citation graph, look at the propagation
operator, run the two-layer network and check its gradient.
"""

import numpy as np

from bayes_gcnn.benchmarks import synthetic_citation_graph
from bayes_gcnn.gcn_model import GCNPosterior, unflatten
from bayes_gcnn.graph_data import normalize

# %%
# The dataset has the Cora counts: 2708 nodes, 5429 edges, 7 classes,
# 1433 binary word features, 140 labelled training nodes.
ds = synthetic_citation_graph("cora", seed=0)
print(ds.num_nodes, ds.num_edges, ds.num_classes, ds.num_features)
print("train nodes per class:", np.bincount(ds.labels[ds.train_mask]))

# %%
# Self-loops are added before degree normalization, so every node keeps
# part of its own signal.  The operator is symmetric with spectral radius 1.
g = normalize(ds)
print("nonzeros:", g.values.size, "= 2 * edges + nodes =", 2 * ds.num_edges + ds.num_nodes)
print("diagonal of a degree-1 node:", g.to_scipy()[np.argmax(ds.degrees() == 1)].max())

# %%
# The posterior object bundles graph, features, labels and prior.  Its
# parameter vector has 1433*16 + 16 + 16*7 + 7 = 23063 entries.
post = GCNPosterior.from_dataset(ds, hidden=16)
theta = post.initial_point(np.random.default_rng(0))
print("parameters:", post.dim)
print({k: v.shape for k, v in unflatten(theta, post.topology).items()})

ev = post.evaluate(theta)
print(f"at the initial point: log-lik {ev['log_lik']:.1f}, train acc {ev['train_acc']:.1f}%")

# %%
# Gradient check on a few coordinates against central differences.
grad = post.grad(theta)
rng = np.random.default_rng(1)
for i in rng.choice(post.dim, 5, replace=False):
    e = np.zeros(post.dim)
    e[i] = 1e-5
    f = lambda t: post.evaluate(t)["log_lik"] - 0.5 * t @ t / post.prior_var
    fd = (f(theta + e) - f(theta - e)) / 2e-5
    print(f"  coord {i:5d}: analytic {grad[i]: .6e}  numeric {fd: .6e}")

# %%
# A few plain gradient-ascent steps already fit the training nodes.
for step in range(200):
    theta = theta + 0.002 * post.grad(theta)
ev = post.evaluate(theta)
print(f"after 200 ascent steps: train {ev['train_acc']:.1f}%, test {ev['test_acc']:.1f}%")
