"""Citation-graph datasets and the renormalized propagation operator.

A dataset lives in a directory of five plain-text files::

    meta.json      {"nodes": int, "features": int, "classes": int, "row_normalize": bool}
    graph.edges    one "src<TAB>dst" pair per line, 0-based
    features.tsv   sparse triples "node<TAB>feature<TAB>value"
    labels.txt     line i holds the integer label of node i
    splits.json    {"train": [...], "test": [...]}

Edges are undirected; duplicates and reversed duplicates collapse to one edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DatasetError",
    "Dataset",
    "NormalizedGraph",
    "load_dataset",
    "save_dataset",
    "normalize",
    "spmm",
]

REQUIRED_FILES = ("meta.json", "graph.edges", "features.tsv", "labels.txt", "splits.json")


class DatasetError(ValueError):
    """Raised when a dataset directory is missing files or fails validation."""


@dataclass(frozen=True)
class Dataset:
    num_nodes: int
    num_features: int
    num_classes: int
    edges: np.ndarray  # (E, 2) int64, each row (min, max), sorted, unique
    features: sp.csr_matrix  # (num_nodes, num_features)
    labels: np.ndarray  # (num_nodes,) int64
    train_mask: np.ndarray  # sorted node indices
    test_mask: np.ndarray
    name: str = ""

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg


@dataclass(frozen=True)
class NormalizedGraph:
    """Symmetric CSR operator ``D^-1/2 (A + I) D^-1/2``."""

    n: int
    values: np.ndarray
    col_index: np.ndarray
    row_start: np.ndarray

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_index, self.row_start), shape=(self.n, self.n)
        )

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return self.to_scipy()

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()


def _canonical_edges(pairs: np.ndarray) -> np.ndarray:
    if pairs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


def _read_lines(path: Path) -> list[str]:
    return path.read_text(encoding="utf-8").splitlines()


def load_dataset(directory) -> Dataset:
    """Read and validate a dataset directory.

    Raises
    ------
    DatasetError
        If a file is missing, a line is malformed, an index is out of range,
        the raw edge list holds a self-loop, or the train and test sets overlap.
        Messages name the file and, where applicable, the 1-based line number.
    """
    root = Path(directory)
    for fname in REQUIRED_FILES:
        if not (root / fname).is_file():
            raise DatasetError(f"missing dataset file: {root / fname}")

    try:
        meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
        n = int(meta["nodes"])
        f = int(meta["features"])
        k = int(meta["classes"])
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetError(f"meta.json: malformed ({exc})") from exc
    if n < 1 or f < 1 or k < 1:
        raise DatasetError("meta.json: nodes, features and classes must be >= 1")
    row_normalize = bool(meta.get("row_normalize", False))

    pairs = []
    for lineno, line in enumerate(_read_lines(root / "graph.edges"), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            s, d = int(parts[0]), int(parts[1])
        except (IndexError, ValueError):
            raise DatasetError(f"graph.edges line {lineno}: expected 'src<TAB>dst'")
        if not (0 <= s < n and 0 <= d < n):
            raise DatasetError(f"graph.edges line {lineno}: node index out of range")
        if s == d:
            raise DatasetError(f"graph.edges line {lineno}: self-loop {s}-{d}")
        pairs.append((s, d))
    edges = _canonical_edges(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))

    rows, cols, vals = [], [], []
    for lineno, line in enumerate(_read_lines(root / "features.tsv"), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            raise DatasetError(f"features.tsv line {lineno}: expected 'node<TAB>feature<TAB>value'")
        if not (0 <= i < n and 0 <= j < f):
            raise DatasetError(f"features.tsv line {lineno}: index out of range")
        if not (np.isfinite(v) and v >= 0):
            raise DatasetError(f"features.tsv line {lineno}: value must be finite and >= 0")
        rows.append(i)
        cols.append(j)
        vals.append(v)
    features = sp.csr_matrix(
        (np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n, f),
    )
    features.sum_duplicates()
    features.sort_indices()
    if row_normalize:
        rowsum = np.asarray(features.sum(axis=1)).ravel()
        inv = np.divide(1.0, rowsum, out=np.zeros_like(rowsum), where=rowsum > 0)
        features = sp.csr_matrix(sp.diags(inv) @ features)

    label_lines = [ln for ln in _read_lines(root / "labels.txt")]
    while label_lines and not label_lines[-1].strip():
        label_lines.pop()
    if len(label_lines) != n:
        raise DatasetError(f"labels.txt: expected {n} lines, found {len(label_lines)}")
    labels = np.empty(n, dtype=np.int64)
    for lineno, line in enumerate(label_lines, start=1):
        try:
            lab = int(line)
        except ValueError:
            raise DatasetError(f"labels.txt line {lineno}: not an integer")
        if not 0 <= lab < k:
            raise DatasetError(f"labels.txt line {lineno}: label {lab} outside [0, {k})")
        labels[lineno - 1] = lab

    try:
        splits = json.loads((root / "splits.json").read_text(encoding="utf-8"))
        train = np.asarray(splits["train"], dtype=np.int64)
        test = np.asarray(splits["test"], dtype=np.int64)
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetError(f"splits.json: malformed ({exc})") from exc
    for name, idx in (("train", train), ("test", test)):
        bad = np.flatnonzero((idx < 0) | (idx >= n))
        if bad.size:
            raise DatasetError(f"splits.json: {name} entry {bad[0]} out of range")
        if np.unique(idx).size != idx.size:
            raise DatasetError(f"splits.json: duplicate node in {name}")
    overlap = np.intersect1d(train, test)
    if overlap.size:
        raise DatasetError(f"splits.json: node {overlap[0]} in both train and test")

    return Dataset(
        num_nodes=n,
        num_features=f,
        num_classes=k,
        edges=edges,
        features=features,
        labels=labels,
        train_mask=np.sort(train),
        test_mask=np.sort(test),
        name=str(meta.get("name", root.name)),
    )


def save_dataset(dataset: Dataset, directory, row_normalize: bool = False) -> Path:
    """Write ``dataset`` in the directory format read by :func:`load_dataset`."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "nodes": dataset.num_nodes,
        "features": dataset.num_features,
        "classes": dataset.num_classes,
        "row_normalize": row_normalize,
    }
    if dataset.name:
        meta["name"] = dataset.name
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    with open(root / "graph.edges", "w", encoding="utf-8", newline="\n") as fh:
        for s, d in dataset.edges:
            fh.write(f"{s}\t{d}\n")
    coo = dataset.features.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(root / "features.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i}\t{j}\t{float(v)!r}\n")
    with open(root / "labels.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{lab}\n" for lab in dataset.labels)
    splits = {"train": dataset.train_mask.tolist(), "test": dataset.test_mask.tolist()}
    (root / "splits.json").write_text(json.dumps(splits) + "\n", encoding="utf-8")
    return root


def normalize(dataset: Dataset) -> NormalizedGraph:
    """Build ``D~^-1/2 (A + I) D~^-1/2`` in CSR form, with ``D~ = D + I``."""
    n = dataset.num_nodes
    e = dataset.edges
    loops = np.arange(n, dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1], loops])
    cols = np.concatenate([e[:, 1], e[:, 0], loops])
    dinv = 1.0 / np.sqrt(dataset.degrees().astype(np.float64) + 1.0)
    vals = dinv[rows] * dinv[cols]
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sort_indices()
    return NormalizedGraph(
        n=n,
        values=mat.data.astype(np.float64, copy=True),
        col_index=mat.indices.astype(np.int64, copy=True),
        row_start=mat.indptr.astype(np.int64, copy=True),
    )


def spmm(g: NormalizedGraph, dense: np.ndarray) -> np.ndarray:
    """Sparse-dense product ``A_hat @ dense``."""
    dense = np.asarray(dense, dtype=np.float64)
    if dense.ndim != 2 or dense.shape[0] != g.n:
        raise ValueError(f"spmm: expected {g.n} rows, got shape {dense.shape}")
    return np.asarray(g._csr @ dense)
