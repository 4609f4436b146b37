"""Chain storage, posterior pooling, accuracy statistics and convergence checks."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ChainStore",
    "Pooled",
    "PosteriorSummary",
    "burn_in_index",
    "pool",
    "summarize",
    "psrf",
    "gelman_rubin",
    "export_trace",
    "export_histogram",
    "export_chain_traces",
    "write_samples_sidecar",
]


def burn_in_index(n_steps: int, fraction: float) -> int:
    """First retained step: the smallest index ``i`` with ``i >= fraction * n_steps``."""
    return min(n_steps, int(math.ceil(fraction * n_steps - 1e-9)))


@dataclass
class ChainStore:
    """Everything one replica recorded, step by step.

    ``samples`` holds full parameter vectors for steps ``sample_steps`` (post
    switch, optionally thinned).  They are kept in memory or, when
    ``sample_file`` is set, in a little-endian float64 file of shape
    ``(len(sample_steps), dim)``.
    """

    replica_id: int
    switch_index: int
    dim: int
    log_lik: np.ndarray
    train_acc: np.ndarray
    test_acc: np.ndarray
    accepted: np.ndarray
    used_gradient: np.ndarray
    temperature: np.ndarray
    tracked: dict = field(default_factory=dict)
    sample_steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    sample_file: Optional[str] = None
    thin: int = 1
    counters: dict = field(default_factory=dict)
    _samples: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_steps(self) -> int:
        return int(self.log_lik.shape[0])

    @property
    def samples(self) -> np.ndarray:
        if self._samples is not None:
            return self._samples
        if self.sample_file is None or self.sample_steps.size == 0:
            return np.zeros((0, self.dim))
        data = np.fromfile(self.sample_file, dtype="<f8")
        return data.reshape(self.sample_steps.size, self.dim)

    def coordinate(self, weight_id: int, start: int = 0) -> np.ndarray:
        """Per-step values of one parameter from step ``start`` on."""
        if not 0 <= weight_id < self.dim:
            raise IndexError(f"weight_id {weight_id} outside [0, {self.dim})")
        if weight_id in self.tracked:
            return np.asarray(self.tracked[weight_id])[start:]
        if self.thin != 1 or (self.sample_steps.size and self.sample_steps[0] > start):
            raise ValueError(f"weight {weight_id} is not tracked and stored samples do not cover step {start}")
        keep = self.sample_steps >= start
        return self.samples[keep, weight_id]

    def coordinate_steps(self, weight_id: int, start: int = 0) -> np.ndarray:
        if weight_id in self.tracked:
            return np.arange(start, self.n_steps)
        return self.sample_steps[self.sample_steps >= start]


@dataclass
class Pooled:
    chains: list
    starts: list
    train_acc: np.ndarray
    test_acc: np.ndarray
    log_lik: np.ndarray
    chain_index: np.ndarray

    def __len__(self) -> int:
        return int(self.train_acc.size)

    def values(self, weight_id: int) -> np.ndarray:
        return np.concatenate([c.coordinate(weight_id, s) for c, s in zip(self.chains, self.starts)])


@dataclass
class PosteriorSummary:
    train: tuple  # (mean, max, std)
    test: tuple
    acceptance_pct: float = float("nan")
    swap_pct: float = float("nan")
    swap_per_sample_pct: float = float("nan")
    minutes: float = float("nan")

    def as_dict(self) -> dict:
        def stats(t):
            return {"mean": t[0], "max": t[1], "std": t[2]}

        return {
            "train_acc": stats(self.train),
            "test_acc": stats(self.test),
            "acceptance_pct": self.acceptance_pct,
            "swap_pct_of_attempts": self.swap_pct,
            "swap_pct_of_samples": self.swap_per_sample_pct,
            "minutes": self.minutes,
        }

    def table_row(self) -> str:
        return (
            f"{self.train[0]:6.2f} {self.train[1]:6.2f} {self.train[2]:5.2f} | "
            f"{self.test[0]:6.2f} {self.test[1]:6.2f} {self.test[2]:5.2f} | "
            f"{self.swap_pct:6.2f} | {self.acceptance_pct:6.2f} | {self.minutes:7.2f}"
        )


def pool(chains: Sequence[ChainStore], burn_in_fraction: Optional[float] = None) -> Pooled:
    """Concatenate every chain's post-burn-in steps.

    ``burn_in_fraction`` defaults to each chain's own switch point.
    """
    if not chains:
        raise ValueError("no chains to pool")
    if burn_in_fraction is not None and not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    starts = []
    for c in chains:
        starts.append(c.switch_index if burn_in_fraction is None else burn_in_index(c.n_steps, burn_in_fraction))
    train = np.concatenate([c.train_acc[s:] for c, s in zip(chains, starts)])
    if train.size == 0:
        raise ValueError("burn-in leaves no samples")
    return Pooled(
        chains=list(chains),
        starts=starts,
        train_acc=train,
        test_acc=np.concatenate([c.test_acc[s:] for c, s in zip(chains, starts)]),
        log_lik=np.concatenate([c.log_lik[s:] for c, s in zip(chains, starts)]),
        chain_index=np.concatenate([np.full(c.n_steps - s, i) for i, (c, s) in enumerate(zip(chains, starts))]),
    )


def _stats(x: np.ndarray) -> tuple:
    return (float(np.mean(x)), float(np.max(x)), float(np.std(x)))


def summarize(train_acc, test_acc, acceptance_pct=float("nan"), swap_pct=float("nan"),
              swap_per_sample_pct=float("nan"), minutes=float("nan")) -> PosteriorSummary:
    """Mean, max and population standard deviation of the pooled accuracies."""
    train_acc = np.asarray(train_acc, dtype=np.float64)
    test_acc = np.asarray(test_acc, dtype=np.float64)
    if train_acc.size == 0 or test_acc.size == 0:
        raise ValueError("cannot summarize an empty trace")
    return PosteriorSummary(_stats(train_acc), _stats(test_acc), acceptance_pct, swap_pct,
                            swap_per_sample_pct, minutes)


def psrf(chains: np.ndarray) -> float:
    """Potential scale reduction factor of an ``(m chains, n draws)`` array.

    Returns 1.0 when every chain is the same constant and ``inf`` when the
    chains are individually constant but disagree.
    """
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two chains")
    m, n = x.shape
    if n < 2:
        raise ValueError("need at least two draws per chain")
    means = x.mean(axis=1)
    w = float(np.mean(x.var(axis=1, ddof=1)))
    b = float(n * means.var(ddof=1))
    if w == 0.0:
        return 1.0 if b == 0.0 else math.inf
    v = (n - 1) / n * w + b / n
    return math.sqrt(v / w)


def gelman_rubin(chains: Sequence[ChainStore], weight_id: int, burn_in_fraction: float = 0.6) -> float:
    """Classic between/within-chain r-hat for one coordinate after burn-in."""
    if len(chains) < 2:
        raise ValueError("gelman_rubin needs at least two chains")
    series = [c.coordinate(weight_id, burn_in_index(c.n_steps, burn_in_fraction)) for c in chains]
    n = min(s.size for s in series)
    if n < 10:
        raise ValueError(f"gelman_rubin needs >= 10 post-burn-in samples per chain, have {n}")
    return psrf(np.stack([s[:n] for s in series]))


def export_trace(chains: Sequence[ChainStore], weight_id: int, path, burn_in_fraction: Optional[float] = None) -> int:
    """Write ``step,value,replica`` rows for the retained steps; returns the row count."""
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "value", "replica"])
        for c in chains:
            start = c.switch_index if burn_in_fraction is None else burn_in_index(c.n_steps, burn_in_fraction)
            vals = c.coordinate(weight_id, start)
            for step, v in zip(c.coordinate_steps(weight_id, start), vals):
                w.writerow([int(step), repr(float(v)), c.replica_id])
                rows += 1
    return rows


def export_histogram(values, path, bins: int = 50) -> np.ndarray:
    """Write ``bin_center,count`` rows; returns the counts."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("no values to histogram")
    counts, edges = np.histogram(values, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_center", "count"])
        for c, k in zip(centers, counts):
            w.writerow([repr(float(c)), int(k)])
    return counts


def export_chain_traces(chain: ChainStore, out_dir) -> None:
    out = Path(out_dir)
    with open(out / f"accuracy_trace_r{chain.replica_id}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "train_acc", "test_acc", "temperature", "accepted"])
        for i in range(chain.n_steps):
            w.writerow([i, repr(float(chain.train_acc[i])), repr(float(chain.test_acc[i])),
                        repr(float(chain.temperature[i])), int(chain.accepted[i])])
    with open(out / f"loglik_trace_r{chain.replica_id}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "log_lik"])
        for i in range(chain.n_steps):
            w.writerow([i, repr(float(chain.log_lik[i]))])


def write_samples_sidecar(chain: ChainStore, path) -> None:
    meta = {
        "file": Path(chain.sample_file).name if chain.sample_file else None,
        "dtype": "float64",
        "byte_order": "little",
        "layout": "row-major [samples x parameters]",
        "rows": int(chain.sample_steps.size),
        "cols": int(chain.dim),
        "replica": chain.replica_id,
        "first_step": int(chain.sample_steps[0]) if chain.sample_steps.size else None,
        "thin": chain.thin,
    }
    Path(path).write_text(json.dumps(meta, indent=2) + "\n")
