"""Command-line front end.

``bayes-gcnn run`` samples a GCN posterior on a dataset directory and writes
the report files; ``bayes-gcnn synth`` writes a synthetic benchmark stand-in in
the same directory format.  Flags may also come from a flat ``key=value``
file passed with ``--config``; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import shutil
import sys
import time
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .benchmarks import BENCHMARKS, DIAGNOSTIC_WEIGHT_IDS, synthetic_citation_graph
from .gcn_model import GCNPosterior, Topology, param_count
from .graph_data import load_dataset, save_dataset
from .posterior import (
    export_chain_traces,
    export_histogram,
    export_trace,
    gelman_rubin,
    pool,
    summarize,
    write_samples_sidecar,
)
from .proposals import Q_RATIO_MODES, ProposalConfig
from .tempering import RunConfig, coordinate

__all__ = ["CliConfig", "validate", "run", "main"]

OUT_ENV = "BAYES_GCNN_OUT"
PROPOSAL_KINDS = {"rw": "random_walk", "lg": "lg", "adapt-lg": "adapt_lg"}
ACTIVATIONS = ("relu", "tanh", "identity")
BACKENDS = ("auto", "serial", "process")


@dataclass
class CliConfig:
    dataset_dir: str = ""
    out_dir: str = ""
    replicas: int = 8
    max_samples: int = 48000
    tmax: float = 2.0
    swap_interval: int = 2
    switch_fraction: float = 0.6
    proposal: str = "adapt-lg"
    lg_rate: float = 0.5
    lr: Optional[float] = None  # 0.01 for adapt-lg, 0.1 for lg
    rw_std: float = 0.005
    prior_var: float = 25.0
    hidden: int = 16
    seed: int = 0
    thin: int = 1
    q_ratio: str = "omit"
    activation: str = "relu"
    prior_in_gradient: bool = True
    weight_ids: tuple = DIAGNOSTIC_WEIGHT_IDS
    bins: int = 50
    backend: str = "auto"

    def proposal_config(self) -> ProposalConfig:
        return ProposalConfig(kind=PROPOSAL_KINDS.get(self.proposal, self.proposal), lr=self.lr,
                              rw_std=self.rw_std, lg_rate=self.lg_rate, q_ratio=self.q_ratio)

    def run_config(self, sample_dir=None) -> RunConfig:
        return RunConfig(
            replicas=self.replicas, max_samples=self.max_samples, t_max=self.tmax,
            swap_interval=self.swap_interval, switch_fraction=self.switch_fraction,
            proposal=self.proposal_config(), seed=self.seed, thin=self.thin,
            track=tuple(self.weight_ids), sample_dir=sample_dir,
        )


def validate(config: CliConfig) -> list[str]:
    """Every problem with ``config``, each message starting with the flag's field name."""
    errs = []
    if not config.dataset_dir:
        errs.append("dataset_dir: required")
    if not config.out_dir:
        errs.append("out_dir: required (or set $%s)" % OUT_ENV)
    if config.replicas < 1:
        errs.append("replicas: must be >= 1")
    if config.max_samples < 1:
        errs.append("max_samples: must be >= 1")
    elif config.replicas >= 1 and config.max_samples < config.replicas:
        errs.append("max_samples: must be >= replicas")
    if not (math.isfinite(config.tmax) and config.tmax >= 1.0):
        errs.append("tmax: must be >= 1")
    if config.swap_interval < 1:
        errs.append("swap_interval: must be >= 1")
    if not 0.0 < config.switch_fraction < 1.0:
        errs.append("switch_fraction: must lie in (0, 1)")
    if config.proposal not in PROPOSAL_KINDS:
        errs.append(f"proposal: must be one of {sorted(PROPOSAL_KINDS)}")
    if not 0.0 <= config.lg_rate <= 1.0:
        errs.append("lg_rate: must lie in [0, 1]")
    if config.lr is not None and not config.lr > 0:
        errs.append("lr: must be > 0")
    if not config.rw_std > 0:
        errs.append("rw_std: must be > 0")
    if not config.prior_var > 0:
        errs.append("prior_var: must be > 0")
    if config.hidden < 1:
        errs.append("hidden: must be >= 1")
    if config.thin < 1:
        errs.append("thin: must be >= 1")
    if config.q_ratio not in Q_RATIO_MODES:
        errs.append(f"q_ratio: must be one of {Q_RATIO_MODES}")
    if config.activation not in ACTIVATIONS:
        errs.append(f"activation: must be one of {ACTIVATIONS}")
    if config.bins < 1:
        errs.append("bins: must be >= 1")
    if config.backend not in BACKENDS:
        errs.append(f"backend: must be one of {BACKENDS}")
    if any(int(w) < 0 for w in config.weight_ids):
        errs.append("weight_ids: must be >= 0")
    return errs


def _echo(config: CliConfig) -> dict:
    d = dataclasses.asdict(config)
    d.pop("out_dir")
    d.pop("backend")
    d["weight_ids"] = list(d["weight_ids"])
    d["lr"] = config.proposal_config().lr
    return d


def _table(summary, label: str) -> str:
    head = ("run", "train mean", "max", "std", "test mean", "max", "std", "swap %", "accept %", "minutes")
    vals = (label, *summary.train, *summary.test, summary.swap_pct, summary.acceptance_pct, summary.minutes)
    lines = ["  ".join(f"{h:>10}" for h in head),
             "  ".join([f"{vals[0]:>10}"] + [f"{v:10.2f}" for v in vals[1:]])]
    return "\n".join(lines) + "\n"


def run(config: CliConfig, log=print) -> int:
    """Sample, summarize and write every report file.  Returns a process exit status."""
    errs = validate(config)
    if errs:
        for e in errs:
            log(f"error: {e}")
        return 2

    out_dir = Path(config.out_dir)
    stage = out_dir.parent / f".{out_dir.name}.partial-{os.getpid()}"
    try:
        started = datetime.now(timezone.utc)
        dataset = load_dataset(config.dataset_dir)
        target = GCNPosterior.from_dataset(
            dataset, hidden=config.hidden, prior_var=config.prior_var, activation=config.activation,
            prior_in_gradient=config.prior_in_gradient,
        )
        if stage.exists():
            shutil.rmtree(stage)
        stage.mkdir(parents=True)
        rc = config.run_config(sample_dir=str(stage))
        rc.validate()
        log(f"{dataset.name}: {dataset.num_nodes} nodes, {dataset.num_edges} edges, "
            f"{target.dim} parameters; {rc.replicas} replicas x {rc.per_replica} samples")
        result = coordinate(target, rc, backend=config.backend)

        pooled = pool(result.chains)
        minutes = result.seconds / 60.0
        summary = summarize(pooled.train_acc, pooled.test_acc, result.acceptance_pct, result.swap_pct,
                            result.swap_per_sample_pct, minutes)
        weight_ids = [int(w) for w in config.weight_ids if int(w) < target.dim]
        rhat = {}
        for w in weight_ids:
            if rc.replicas >= 2:
                try:
                    rhat[str(w)] = gelman_rubin(result.chains, w, config.switch_fraction)
                except ValueError as exc:
                    log(f"warning: r-hat for weight {w} unavailable ({exc})")
            export_trace(result.chains, w, stage / f"trace_w{w}.csv")
            export_histogram(pooled.values(w), stage / f"hist_w{w}.csv", bins=config.bins)
        for chain in result.chains:
            export_chain_traces(chain, stage)
            write_samples_sidecar(chain, stage / f"samples_r{chain.replica_id}.json")

        summ = summary.as_dict()
        summ.pop("minutes")
        report = {
            "version": __version__,
            "config": _echo(config),
            "dataset": {
                "name": dataset.name, "nodes": dataset.num_nodes, "edges": dataset.num_edges,
                "features": dataset.num_features, "classes": dataset.num_classes,
                "train": int(dataset.train_mask.size), "test": int(dataset.test_mask.size),
            },
            "topology": {"in_features": target.topology.in_features, "hidden": target.topology.hidden,
                         "out_classes": target.topology.out_classes, "parameters": target.dim},
            "ladder": result.ladder.tolist(),
            "per_replica_samples": rc.per_replica,
            "dropped_remainder_samples": rc.max_samples - rc.per_replica * rc.replicas,
            "switch_index": rc.switch_index,
            "retained_per_replica": rc.per_replica - rc.switch_index,
            "thin": rc.thin,
            "summary": summ,
            "counters": {
                "proposals": sum(c.counters["proposals"] for c in result.chains),
                "accepted": sum(c.counters["accepted"] for c in result.chains),
                "lg_proposals": sum(c.counters["lg_proposals"] for c in result.chains),
                "lg_accepted": sum(c.counters["lg_accepted"] for c in result.chains),
                "swaps_attempted": result.swaps_attempted,
                "swaps_accepted": result.swaps_accepted,
                "per_replica": [c.counters for c in result.chains],
            },
            "rhat": rhat,
            "timing": {
                "minutes": minutes,
                "started": started.isoformat(),
                "finished": datetime.now(timezone.utc).isoformat(),
                "backend": result.backend,
            },
        }
        (stage / "run_summary.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        (stage / "report.txt").write_text(_table(summary, config.proposal))

        out_dir.mkdir(parents=True, exist_ok=True)
        for f in sorted(stage.iterdir()):
            os.replace(f, out_dir / f.name)
        stage.rmdir()
        log(_table(summary, config.proposal).rstrip())
        return 0
    except Exception as exc:  # any module error ends the run
        log(f"error: {type(exc).__name__}: {exc}")
        if stage.exists():
            shutil.rmtree(stage, ignore_errors=True)
        return 1


# -- argument parsing ---------------------------------------------------------

def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_ids(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(",", " ").split())


def _coerce(name: str, value):
    default = CliConfig.__dataclass_fields__[name].default
    if name == "lr":
        return None if value in (None, "", "none", "None") else float(value)
    if name == "weight_ids":
        return _parse_ids(value)
    if isinstance(default, bool):
        return _parse_bool(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return str(value)


def read_config_file(path) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment; keys may use dashes."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path} line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CliConfig.__dataclass_fields__:
            raise ValueError(f"{path} line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bayes-gcnn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="sample the posterior and write reports")
    r.add_argument("--config", help="flat key=value file; command-line flags override it")
    d = CliConfig()
    r.add_argument("--dataset-dir", help="dataset directory")
    r.add_argument("--out-dir", help=f"output directory (default: $%s/<dataset>)" % OUT_ENV)
    r.add_argument("--replicas", type=int, help=f"number of replicas (default {d.replicas})")
    r.add_argument("--max-samples", type=int, help=f"total samples over all replicas (default {d.max_samples})")
    r.add_argument("--tmax", type=float, help=f"maximum temperature (default {d.tmax})")
    r.add_argument("--swap-interval", type=int, help=f"steps between swap rounds (default {d.swap_interval})")
    r.add_argument("--switch-fraction", type=float,
                   help=f"fraction of samples before all temperatures drop to 1 (default {d.switch_fraction})")
    r.add_argument("--proposal", choices=sorted(PROPOSAL_KINDS), help=f"proposal kernel (default {d.proposal})")
    r.add_argument("--lg-rate", type=float, help=f"probability of a gradient proposal (default {d.lg_rate})")
    r.add_argument("--lr", type=float, help="gradient step scale (default 0.01 adapt-lg, 0.1 lg)")
    r.add_argument("--rw-std", type=float, help=f"proposal noise standard deviation (default {d.rw_std})")
    r.add_argument("--prior-var", type=float, help=f"prior variance (default {d.prior_var})")
    r.add_argument("--hidden", type=int, help=f"hidden units (default {d.hidden})")
    r.add_argument("--seed", type=int, help=f"master seed (default {d.seed})")
    r.add_argument("--thin", type=int, help=f"keep every n-th post-switch sample vector (default {d.thin})")
    r.add_argument("--q-ratio", choices=Q_RATIO_MODES,
                   help=f"proposal-density correction for gradient moves (default {d.q_ratio})")
    r.add_argument("--activation", choices=ACTIVATIONS, help=f"hidden activation (default {d.activation})")
    r.add_argument("--prior-in-gradient", type=_parse_bool,
                   help="include the prior in the proposal gradient (default true)")
    r.add_argument("--weight-ids", help="comma-separated parameter indices to trace and diagnose")
    r.add_argument("--bins", type=int, help=f"histogram bins (default {d.bins})")
    r.add_argument("--backend", choices=BACKENDS, help=f"replica execution (default {d.backend})")

    s = sub.add_parser("synth", help="write a synthetic benchmark stand-in dataset")
    s.add_argument("benchmark", choices=sorted(BENCHMARKS))
    s.add_argument("out_dir")
    s.add_argument("--seed", type=int, default=0)
    return p


def config_from_args(args: argparse.Namespace) -> CliConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for f in fields(CliConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _coerce(f.name, v)
    cfg = CliConfig(**values)
    if not cfg.out_dir and os.environ.get(OUT_ENV) and cfg.dataset_dir:
        cfg.out_dir = str(Path(os.environ[OUT_ENV]) / Path(cfg.dataset_dir).name)
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "synth":
        ds = synthetic_citation_graph(args.benchmark, seed=args.seed)
        save_dataset(ds, args.out_dir)
        print(f"wrote {ds.name} ({ds.num_nodes} nodes, {ds.num_edges} edges) to {args.out_dir}")
        return 0
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg, log=lambda msg: print(msg, file=sys.stderr if msg.startswith("error") else sys.stdout))


if __name__ == "__main__":
    sys.exit(main())
