import numpy as np
import pytest
import scipy.sparse as sp

from bayes_gcnn.graph_data import Dataset, _canonical_edges


def random_dataset(rng, n=12, f=7, k=3, p_edge=0.25, n_train=6, n_test=4, dense_features=False):
    """Small random graph; every node gets at least one edge when possible."""
    upper = np.triu(rng.random((n, n)) < p_edge, k=1)
    pairs = np.argwhere(upper)
    edges = _canonical_edges(pairs.astype(np.int64))
    if dense_features:
        feats = rng.random((n, f))
    else:
        feats = (rng.random((n, f)) < 0.4).astype(np.float64)
    order = rng.permutation(n)
    return Dataset(
        num_nodes=n, num_features=f, num_classes=k, edges=edges,
        features=sp.csr_matrix(feats), labels=rng.integers(0, k, n),
        train_mask=np.sort(order[:n_train]), test_mask=np.sort(order[n_train:n_train + n_test]),
        name="toy",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy(rng):
    return random_dataset(rng)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
