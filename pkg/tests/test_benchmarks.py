import numpy as np
import pytest

from bayes_gcnn.benchmarks import BENCHMARKS, synthetic_citation_graph
from bayes_gcnn.targets import GaussianMixture1D, GaussianTarget


@pytest.mark.parametrize("name", ["cora", "citeseer"])
def test_synthetic_graph_matches_benchmark_counts(name):
    b = BENCHMARKS[name]
    ds = synthetic_citation_graph(name, seed=0)
    assert (ds.num_nodes, ds.num_edges, ds.num_classes, ds.num_features) == (b.nodes, b.edges, b.classes, b.features)
    assert ds.train_mask.size == b.train and ds.test_mask.size == b.test
    assert np.intersect1d(ds.train_mask, ds.test_mask).size == 0
    # balanced training split: the same count for every class
    counts = np.bincount(ds.labels[ds.train_mask], minlength=b.classes)
    assert np.all(counts == b.train // b.classes)
    same = ds.labels[ds.edges[:, 0]] == ds.labels[ds.edges[:, 1]]
    assert 0.7 < same.mean() < 0.95
    assert np.all(ds.edges[:, 0] < ds.edges[:, 1])


def test_synthetic_graph_is_seeded():
    a = synthetic_citation_graph("cora", seed=3)
    b = synthetic_citation_graph("cora", seed=3)
    c = synthetic_citation_graph("cora", seed=4)
    np.testing.assert_array_equal(a.edges, b.edges)
    assert (a.features != b.features).nnz == 0
    assert not np.array_equal(a.labels, c.labels)


def test_cora_class_sizes():
    ds = synthetic_citation_graph("cora", seed=0)
    np.testing.assert_array_equal(np.bincount(ds.labels), BENCHMARKS["cora"].class_sizes)


def finite_difference(f, x, h=1e-6):
    return np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(x.size)])


def test_analytic_target_gradients():
    g = GaussianTarget([1.0, -0.5], [[1.0, 0.6], [0.6, 0.5]])
    x = np.array([0.3, 0.2])
    np.testing.assert_allclose(g.grad(x), finite_difference(g.log_density, x), rtol=1e-6)
    m = GaussianMixture1D()
    for v in (-4.2, 0.1, 3.3):
        x = np.array([v])
        np.testing.assert_allclose(m.grad(x), finite_difference(m.log_density, x), rtol=1e-6)
    from scipy.integrate import quad

    assert quad(lambda t: np.exp(m.log_density([t])), -10, 10)[0] == pytest.approx(1.0, abs=1e-8)
