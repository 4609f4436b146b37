"""Benchmark descriptors and a synthetic stand-in generator for citation graphs.

The descriptors carry the node, edge, class and split counts of the three
Planetoid citation benchmarks plus their GCN topologies.  When the real data
is not on disk, :func:`synthetic_citation_graph` builds a graph with exactly
those counts: a degree-heterogeneous, label-homophilous graph whose sparse
binary bag-of-words features are drawn from per-class topic vocabularies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .gcn_model import Topology
from .graph_data import Dataset

__all__ = ["Benchmark", "BENCHMARKS", "DIAGNOSTIC_WEIGHT_IDS", "synthetic_citation_graph"]


@dataclass(frozen=True)
class Benchmark:
    name: str
    nodes: int
    edges: int
    classes: int
    features: int
    train: int
    test: int
    hidden: int = 16
    class_sizes: tuple[int, ...] | None = None
    words_per_node: float = 18.0
    homophily: float = 0.81

    @property
    def topology(self) -> Topology:
        return Topology(self.features, self.hidden, self.classes)


BENCHMARKS = {
    "cora": Benchmark("cora", 2708, 5429, 7, 1433, 140, 1000,
                      class_sizes=(351, 217, 418, 818, 426, 298, 180), words_per_node=18.2, homophily=0.81),
    "citeseer": Benchmark("citeseer", 3327, 4732, 6, 3703, 120, 1000,
                          class_sizes=(264, 590, 668, 701, 596, 508), words_per_node=31.7, homophily=0.74),
    "pubmed": Benchmark("pubmed", 19717, 44338, 3, 500, 60, 1000,
                        class_sizes=(4103, 7739, 7875), words_per_node=50.1, homophily=0.80),
}

# default weights traced and checked for between-chain convergence
DIAGNOSTIC_WEIGHT_IDS = (0, 100, 1000, 5000, 8000)


def _class_sizes(b: Benchmark) -> np.ndarray:
    if b.class_sizes is not None:
        return np.asarray(b.class_sizes)
    sizes = np.full(b.classes, b.nodes // b.classes)
    sizes[: b.nodes - sizes.sum()] += 1
    return sizes


def synthetic_citation_graph(benchmark: Benchmark | str = "cora", seed: int = 0,
                             topic_words: int = 60, topic_share: float = 0.15,
                             noise_frac: float = 0.3) -> Dataset:
    """Generate a citation-like graph matching ``benchmark``'s counts exactly.

    Parameters
    ----------
    benchmark : Benchmark or name
    seed : int
    topic_words : int
        Size of each class's characteristic vocabulary.
    topic_share : float
        Expected fraction of a node's words drawn from its class vocabulary.
    noise_frac : float
        Fraction of nodes whose words come from a random other class, so that
        features alone cannot resolve every label and the graph matters.
    """
    b = BENCHMARKS[benchmark] if isinstance(benchmark, str) else benchmark
    rng = np.random.default_rng(seed)
    n, k, f = b.nodes, b.classes, b.features

    labels = rng.permutation(np.repeat(np.arange(k), _class_sizes(b)))
    members = [np.flatnonzero(labels == c) for c in range(k)]

    # heavy-tailed attachment propensity
    weight = rng.pareto(2.2, size=n) + 1.0
    cdf_all = np.cumsum(weight) / weight.sum()
    cdf_class = [np.cumsum(weight[m]) / weight[m].sum() for m in members]

    def draw(cdf, size):
        return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), cdf.size - 1)

    edges: set[tuple[int, int]] = set()
    # one in-class neighbor per node keeps the graph free of isolated nodes
    for u in rng.permutation(n):
        c = labels[u]
        v = int(members[c][draw(cdf_class[c], 1)[0]])
        if v != u:
            edges.add((min(int(u), v), max(int(u), v)))
        if len(edges) == b.edges:
            break
    # remaining edges are homophilous at the rate that brings the total to b.homophily
    h_rest = max(0.0, (b.homophily * b.edges - len(edges)) / max(1, b.edges - len(edges)))
    while len(edges) < b.edges:
        batch = b.edges - len(edges)
        us = draw(cdf_all, batch)
        same = rng.random(batch) < h_rest
        others = draw(cdf_all, batch)
        for u, s, o in zip(us, same, others):
            if s:
                c = labels[u]
                v = int(members[c][draw(cdf_class[c], 1)[0]])
            else:
                v = int(o)
            if u != v:
                edges.add((min(int(u), v), max(int(u), v)))
            if len(edges) == b.edges:
                break
    edge_arr = np.array(sorted(edges), dtype=np.int64)

    # per-class topic vocabularies over a shared background vocabulary
    vocab = rng.permutation(f)
    topics = [vocab[(c * topic_words) % f: (c * topic_words) % f + topic_words] for c in range(k)]
    background = rng.dirichlet(np.full(f, 0.5))
    feature_class = labels.copy()
    noisy = rng.random(n) < noise_frac
    feature_class[noisy] = (labels[noisy] + rng.integers(1, k, size=noisy.sum())) % k
    rows, cols = [], []
    for i in range(n):
        nwords = max(1, rng.poisson(b.words_per_node))
        n_topic = rng.binomial(nwords, topic_share)
        words = np.concatenate([
            rng.choice(topics[feature_class[i]], size=n_topic),
            rng.choice(f, size=nwords - n_topic, p=background),
        ])
        words = np.unique(words)
        rows.append(np.full(words.size, i))
        cols.append(words)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    features = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, f))

    per_class = b.train // k
    train = np.sort(np.concatenate([rng.choice(m, size=per_class, replace=False) for m in members]))
    rest = np.setdiff1d(np.arange(n), train)
    test = np.sort(rng.choice(rest, size=b.test, replace=False))

    return Dataset(
        num_nodes=n, num_features=f, num_classes=k, edges=edge_arr, features=features,
        labels=labels, train_mask=train, test_mask=test, name=f"synthetic-{b.name}",
    )
