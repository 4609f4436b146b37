import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from bayes_gcnn.graph_data import DatasetError, load_dataset, normalize, save_dataset, spmm

from conftest import random_dataset


def dense_operator(ds):
    a = np.zeros((ds.num_nodes, ds.num_nodes))
    for s, d in ds.edges:
        a[s, d] = a[d, s] = 1.0
    a += np.eye(ds.num_nodes)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return dinv[:, None] * a * dinv[None, :]


def test_normalize_matches_dense_formula(toy):
    g = normalize(toy)
    np.testing.assert_allclose(g.to_dense(), dense_operator(toy), rtol=0, atol=1e-15)


def test_operator_is_symmetric_with_unit_spectral_radius(toy):
    a = normalize(toy).to_dense()
    np.testing.assert_array_equal(a, a.T)
    eig = np.linalg.eigvalsh(a)
    assert eig.max() == pytest.approx(1.0, abs=1e-12)
    assert eig.min() > -1.0


def test_isolated_node_keeps_its_own_features():
    rng = np.random.default_rng(0)
    ds = random_dataset(rng, n=5, p_edge=0.0)
    g = normalize(ds)
    np.testing.assert_array_equal(g.to_dense(), np.eye(5))
    x = rng.random((5, 3))
    np.testing.assert_array_equal(spmm(g, x), x)


def test_spmm_matches_dense_product(toy, rng):
    g = normalize(toy)
    x = rng.standard_normal((toy.num_nodes, 5))
    np.testing.assert_allclose(spmm(g, x), g.to_dense() @ x, rtol=1e-13, atol=1e-14)


def test_spmm_rejects_wrong_row_count(toy):
    with pytest.raises(ValueError, match="rows"):
        spmm(normalize(toy), np.zeros((toy.num_nodes + 1, 2)))


def test_save_load_round_trip(toy, tmp_path):
    save_dataset(toy, tmp_path)
    back = load_dataset(tmp_path)
    assert back.num_nodes == toy.num_nodes and back.num_classes == toy.num_classes
    np.testing.assert_array_equal(back.edges, toy.edges)
    np.testing.assert_array_equal(back.labels, toy.labels)
    np.testing.assert_array_equal(back.train_mask, toy.train_mask)
    np.testing.assert_array_equal(back.features.toarray(), toy.features.toarray())


def test_duplicate_and_reversed_edges_collapse(toy, tmp_path):
    save_dataset(toy, tmp_path)
    s, d = toy.edges[0]
    with open(tmp_path / "graph.edges", "a") as fh:
        fh.write(f"{d}\t{s}\n{s}\t{d}\n")
    assert load_dataset(tmp_path).num_edges == toy.num_edges


def test_row_normalize_flag(toy, tmp_path):
    save_dataset(toy, tmp_path, row_normalize=True)
    x = load_dataset(tmp_path).features.toarray()
    sums = x.sum(axis=1)
    nonzero = toy.features.toarray().sum(axis=1) > 0
    np.testing.assert_allclose(sums[nonzero], 1.0)
    np.testing.assert_array_equal(sums[~nonzero], 0.0)


@pytest.mark.parametrize(
    "fname, content, match",
    [
        ("graph.edges", "0\t0\n", r"graph.edges line 1: self-loop"),
        ("graph.edges", "0\t1\n0\t999\n", r"graph.edges line 2: node index out of range"),
        ("graph.edges", "0 1\n", r"graph.edges line 1"),
        ("features.tsv", "0\t0\tabc\n", r"features.tsv line 1"),
        ("features.tsv", "0\t0\t-1\n", r"features.tsv line 1: value"),
        ("labels.txt", "0\n", r"labels.txt: expected"),
    ],
)
def test_malformed_files_name_file_and_line(toy, tmp_path, fname, content, match):
    save_dataset(toy, tmp_path)
    (tmp_path / fname).write_text(content)
    with pytest.raises(DatasetError, match=match):
        load_dataset(tmp_path)


def test_label_out_of_range(toy, tmp_path):
    save_dataset(toy, tmp_path)
    lines = (tmp_path / "labels.txt").read_text().splitlines()
    lines[3] = "99"
    (tmp_path / "labels.txt").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError, match="labels.txt line 4"):
        load_dataset(tmp_path)


def test_overlapping_splits_rejected(toy, tmp_path):
    save_dataset(toy, tmp_path)
    node = int(toy.train_mask[0])
    splits = {"train": toy.train_mask.tolist(), "test": toy.test_mask.tolist() + [node]}
    (tmp_path / "splits.json").write_text(json.dumps(splits))
    with pytest.raises(DatasetError, match="both train and test"):
        load_dataset(tmp_path)


def test_missing_file(toy, tmp_path):
    save_dataset(toy, tmp_path)
    (tmp_path / "splits.json").unlink()
    with pytest.raises(DatasetError, match="splits.json"):
        load_dataset(tmp_path)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 25), p=st.floats(0.0, 1.0))
def test_operator_properties_on_random_graphs(seed, n, p):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n=n, f=3, k=2, p_edge=p, n_train=1, n_test=0)
    g = normalize(ds)
    a = g.to_dense()
    np.testing.assert_allclose(a, dense_operator(ds), atol=1e-15)
    assert np.all(np.diag(a) > 0)
    # row_start is a valid CSR index and columns are sorted within each row
    assert g.row_start[0] == 0 and g.row_start[-1] == g.values.size
    for i in range(n):
        cols = g.col_index[g.row_start[i]:g.row_start[i + 1]]
        assert np.all(np.diff(cols) > 0)
    x = rng.standard_normal((n, 2))
    np.testing.assert_allclose(spmm(g, x), a @ x, atol=1e-12)
