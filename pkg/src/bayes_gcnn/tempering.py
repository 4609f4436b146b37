"""Parallel tempering with a manager and one worker per replica.

Every replica runs the same Metropolis-Hastings loop at its ladder temperature.
At each swap round the workers stop at a barrier, report their current
log-likelihood, and the manager sweeps the adjacent pairs ``(0,1), (1,2), ...``
once, deciding each exchange with its own random stream.  States that moved
are shipped between workers; temperatures stay attached to ladder positions.
After the switch step every temperature becomes 1 and no further swaps are
proposed.

Randomness is confined to ``M + 1`` streams spawned from the master seed
(one per replica, one for the manager) and the barrier protocol fixes the
order of all decisions, so the serial and multiprocess backends produce
bit-identical chains.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .posterior import ChainStore, burn_in_index
from .proposals import AdamMoments, ProposalConfig, mh_accept, propose_lg, propose_rw

__all__ = [
    "build_ladder",
    "swap_log_prob",
    "RunConfig",
    "ReplicaState",
    "Replica",
    "swap_event",
    "run_replica",
    "coordinate",
    "EnsembleResult",
]


def build_ladder(m: int, t_max: float) -> np.ndarray:
    """Geometric temperatures ``t_max ** (i / (m - 1))``; ``[1.0]`` for one replica."""
    if m < 1:
        raise ValueError("need at least one replica")
    if not t_max >= 1.0:
        raise ValueError("t_max must be >= 1")
    if m == 1:
        return np.ones(1)
    temps = t_max ** (np.arange(m) / (m - 1))
    temps[0], temps[-1] = 1.0, float(t_max)
    return temps


def swap_log_prob(log_lik_i: float, log_lik_j: float, t_i: float, t_j: float) -> float:
    """Log acceptance probability for exchanging the states at temperatures ``t_i`` and ``t_j``."""
    if t_i < 1 or t_j < 1:
        raise ValueError("temperatures must be >= 1")
    if log_lik_i == log_lik_j or t_i == t_j:
        return 0.0
    return min(0.0, (1.0 / t_i - 1.0 / t_j) * (log_lik_j - log_lik_i))


@dataclass(frozen=True)
class RunConfig:
    replicas: int = 8
    max_samples: int = 48000
    t_max: float = 2.0
    swap_interval: int = 2
    switch_fraction: float = 0.6
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    seed: int = 0
    thin: int = 1
    # parameters whose every step is recorded, pre-switch included
    track: tuple = (0, 100, 1000, 5000, 8000)
    keep_samples: bool = True
    sample_dir: Optional[str] = None
    swap_after_switch: bool = False

    @property
    def per_replica(self) -> int:
        return self.max_samples // self.replicas if self.replicas >= 1 else 0

    @property
    def switch_index(self) -> int:
        return burn_in_index(self.per_replica, self.switch_fraction)

    def errors(self) -> list[str]:
        errs = []
        if self.replicas < 1:
            errs.append("replicas: must be >= 1")
        if self.max_samples < 0:
            errs.append("max_samples: must be >= 0")
        if not self.t_max >= 1.0:
            errs.append("tmax: must be >= 1")
        if self.swap_interval < 1:
            errs.append("swap_interval: must be >= 1")
        if not 0.0 < self.switch_fraction < 1.0:
            errs.append("switch_fraction: must lie in (0, 1)")
        if self.thin < 1:
            errs.append("thin: must be >= 1")
        errs.extend(self.proposal.errors())
        return errs

    def validate(self) -> "RunConfig":
        errs = self.errors()
        if errs:
            raise ValueError("; ".join(errs))
        return self


@dataclass
class ReplicaState:
    id: int
    temperature: float
    theta: np.ndarray
    moments: AdamMoments
    rng: np.random.Generator
    log_lik: float
    log_prior: float
    metrics: dict
    grad: Optional[np.ndarray] = None
    proposals: int = 0
    accepted: int = 0
    lg_proposals: int = 0
    lg_accepted: int = 0
    swaps_attempted: int = 0
    swaps_accepted: int = 0

    # fields that travel with a swapped state; temperature, rng and counters stay put
    SWAPPED = ("theta", "moments", "log_lik", "log_prior", "metrics", "grad")

    def payload(self) -> dict:
        return {k: getattr(self, k) for k in self.SWAPPED}

    def load(self, payload: dict) -> None:
        for k in self.SWAPPED:
            setattr(self, k, payload[k])


def _metrics(ev: dict) -> dict:
    return {"train_acc": float(ev.get("train_acc", math.nan)), "test_acc": float(ev.get("test_acc", math.nan))}


class Replica:
    """One chain: owns its state and records every step.

    Parameters
    ----------
    rid : int
        Ladder position.
    temperature : float
    target
        Object with ``dim``, ``initial_point(rng)``, ``evaluate(theta)`` and
        ``grad(theta)``; ``evaluate`` returns at least ``log_lik`` and
        ``log_prior``.
    config : RunConfig
    seed : np.random.SeedSequence
    """

    def __init__(self, rid, temperature, target, config: RunConfig, seed, theta0=None):
        self.target = target
        self.config = config
        self.cfg = config.proposal
        self.budget = config.per_replica
        self.switch_index = config.switch_index
        rng = np.random.default_rng(seed)
        theta = np.asarray(theta0 if theta0 is not None else target.initial_point(rng), dtype=np.float64).copy()
        ev = target.evaluate(theta)
        self.state = ReplicaState(
            id=rid, temperature=float(temperature), theta=theta, moments=AdamMoments.zeros(theta.size),
            rng=rng, log_lik=float(ev["log_lik"]), log_prior=float(ev["log_prior"]), metrics=_metrics(ev),
        )
        self.step = 0
        n = self.budget
        self.log_lik = np.empty(n)
        self.train_acc = np.empty(n)
        self.test_acc = np.empty(n)
        self.accepted = np.zeros(n, dtype=bool)
        self.used_gradient = np.zeros(n, dtype=bool)
        self.temperature = np.empty(n)
        dim = theta.size
        self.track = tuple(i for i in config.track if 0 <= i < dim)
        self.tracked = {i: np.empty(n) for i in self.track}
        self.sample_steps = []
        self._samples = []
        self.sample_file = None
        if config.keep_samples and config.sample_dir is not None:
            self.sample_file = str(Path(config.sample_dir) / f"samples_r{rid}.bin")
            open(self.sample_file, "wb").close()
        self._sample_fh = None

    # -- one Metropolis-Hastings step ---------------------------------------
    def _grad(self, theta):
        return np.asarray(self.target.grad(theta), dtype=np.float64)

    def advance(self) -> None:
        s = self.state
        if self.step == self.switch_index:
            s.temperature = 1.0
        cfg = self.cfg
        use_grad = cfg.uses_gradient and s.rng.random() < cfg.lg_rate
        if use_grad:
            if s.grad is None:
                s.grad = self._grad(s.theta)
            prop, new_moments = propose_lg(s.theta, self._grad, cfg, s.moments, s.rng, grad_theta=s.grad)
            # moments advance whether or not the move is accepted
            s.moments = new_moments
            s.lg_proposals += 1
        else:
            prop = propose_rw(s.theta, cfg, s.rng)
        ev = self.target.evaluate(prop.theta_star)
        s.proposals += 1
        ok = mh_accept(ev["log_lik"], s.log_lik, ev["log_prior"], s.log_prior, prop.log_q_ratio,
                       s.temperature, s.rng)
        if ok:
            s.theta = prop.theta_star
            s.log_lik = float(ev["log_lik"])
            s.log_prior = float(ev["log_prior"])
            s.metrics = _metrics(ev)
            s.grad = prop.grad_star
            s.accepted += 1
            s.lg_accepted += int(use_grad)
        self._record(ok, use_grad)

    def _record(self, ok: bool, used_gradient: bool) -> None:
        i, s = self.step, self.state
        self.log_lik[i] = s.log_lik
        self.train_acc[i] = s.metrics["train_acc"]
        self.test_acc[i] = s.metrics["test_acc"]
        self.accepted[i] = ok
        self.used_gradient[i] = used_gradient
        self.temperature[i] = s.temperature
        for k in self.track:
            self.tracked[k][i] = s.theta[k]
        if self.config.keep_samples and i >= self.switch_index and (i - self.switch_index) % self.config.thin == 0:
            self.sample_steps.append(i)
            if self.sample_file is not None:
                if self._sample_fh is None:
                    self._sample_fh = open(self.sample_file, "ab")
                self._sample_fh.write(s.theta.astype("<f8").tobytes())
            else:
                self._samples.append(s.theta.copy())
        self.step += 1

    def run(self, n_steps: int) -> None:
        for _ in range(min(n_steps, self.budget - self.step)):
            self.advance()

    def finish(self) -> ChainStore:
        if self._sample_fh is not None:
            self._sample_fh.close()
            self._sample_fh = None
        s = self.state
        samples = None
        if self.sample_file is None:
            samples = np.array(self._samples).reshape(len(self._samples), s.theta.size)
        return ChainStore(
            replica_id=s.id, switch_index=self.switch_index, dim=s.theta.size,
            log_lik=self.log_lik, train_acc=self.train_acc, test_acc=self.test_acc,
            accepted=self.accepted, used_gradient=self.used_gradient, temperature=self.temperature,
            tracked=self.tracked, sample_steps=np.asarray(self.sample_steps, dtype=np.int64),
            sample_file=self.sample_file, thin=self.config.thin, _samples=samples,
            counters={
                "proposals": s.proposals, "accepted": s.accepted,
                "lg_proposals": s.lg_proposals, "lg_accepted": s.lg_accepted,
                "swaps_attempted": s.swaps_attempted, "swaps_accepted": s.swaps_accepted,
            },
        )


def swap_event(a: ReplicaState, b: ReplicaState, rng: np.random.Generator) -> bool:
    """Propose exchanging the states of two adjacent replicas in place."""
    lp = swap_log_prob(a.log_lik, b.log_lik, a.temperature, b.temperature)
    u = rng.random()
    a.swaps_attempted += 1
    b.swaps_attempted += 1
    if u < math.exp(lp):
        pa, pb = a.payload(), b.payload()
        a.load(pb)
        b.load(pa)
        a.swaps_accepted += 1
        b.swaps_accepted += 1
        return True
    return False


def run_replica(target, config: RunConfig, seed=0, temperature: float = 1.0) -> ChainStore:
    """Run a single replica with no partners; equivalent to plain Metropolis-Hastings."""
    config.validate()
    seq = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    rep = Replica(0, temperature, target, config, seq)
    rep.run(rep.budget)
    return rep.finish()


# -- transports -----------------------------------------------------------

class _SerialBackend:
    def __init__(self, replicas):
        self.replicas = replicas

    def run(self, n):
        for r in self.replicas:
            r.run(n)
        return [r.state.log_lik for r in self.replicas]

    def payload(self, i):
        return self.replicas[i].state.payload()

    def load(self, i, payload):
        self.replicas[i].state.load(payload)

    def add_swap_counts(self, i, attempted, accepted):
        st = self.replicas[i].state
        st.swaps_attempted += attempted
        st.swaps_accepted += accepted

    def finish(self):
        return [r.finish() for r in self.replicas]

    def close(self):
        pass


def _worker(conn, rid, temperature, target, config, seed):
    try:
        rep = Replica(rid, temperature, target, config, seed)
        conn.send(("ok", None))
        while True:
            cmd, arg = conn.recv()
            if cmd == "run":
                rep.run(arg)
                conn.send(("ok", rep.state.log_lik))
            elif cmd == "payload":
                conn.send(("ok", rep.state.payload()))
            elif cmd == "load":
                rep.state.load(arg)
                conn.send(("ok", None))
            elif cmd == "swaps":
                rep.state.swaps_attempted += arg[0]
                rep.state.swaps_accepted += arg[1]
                conn.send(("ok", None))
            elif cmd == "finish":
                conn.send(("ok", rep.finish()))
                return
    except Exception:
        conn.send(("error", f"replica {rid}:\n{traceback.format_exc()}"))


class _ProcessBackend:
    def __init__(self, temps, target, config, seeds):
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
        self.conns, self.procs = [], []
        for i, t in enumerate(temps):
            parent, child = ctx.Pipe()
            p = ctx.Process(target=_worker, args=(child, i, t, target, config, seeds[i]), daemon=True)
            p.start()
            child.close()
            self.conns.append(parent)
            self.procs.append(p)
        for i in range(len(temps)):
            self._recv(i)

    def _recv(self, i):
        try:
            status, value = self.conns[i].recv()
        except (EOFError, OSError) as exc:
            raise RuntimeError(f"replica {i} worker died: {exc!r}") from exc
        if status == "error":
            raise RuntimeError(value)
        return value

    def _all(self, cmd, args):
        for c, a in zip(self.conns, args):
            c.send((cmd, a))
        return [self._recv(i) for i in range(len(self.conns))]

    def run(self, n):
        return self._all("run", [n] * len(self.conns))

    def payload(self, i):
        self.conns[i].send(("payload", None))
        return self._recv(i)

    def load(self, i, payload):
        self.conns[i].send(("load", payload))
        self._recv(i)

    def add_swap_counts(self, i, attempted, accepted):
        self.conns[i].send(("swaps", (attempted, accepted)))
        self._recv(i)

    def finish(self):
        out = self._all("finish", [None] * len(self.conns))
        for p in self.procs:
            p.join(timeout=30)
        return out

    def close(self):
        for p in self.procs:
            if p.is_alive():
                p.terminate()
        for c in self.conns:
            c.close()


@dataclass
class EnsembleResult:
    chains: list
    ladder: np.ndarray
    config: RunConfig
    swaps_attempted: int
    swaps_accepted: int
    pair_attempted: np.ndarray
    pair_accepted: np.ndarray
    seconds: float
    backend: str

    @property
    def acceptance_pct(self) -> float:
        prop = sum(c.counters["proposals"] for c in self.chains)
        acc = sum(c.counters["accepted"] for c in self.chains)
        return 100.0 * acc / prop if prop else math.nan

    @property
    def swap_pct(self) -> float:
        """Accepted swaps as a share of attempted swaps."""
        return 100.0 * self.swaps_accepted / self.swaps_attempted if self.swaps_attempted else math.nan

    @property
    def swap_per_sample_pct(self) -> float:
        """Accepted swaps as a share of all samples drawn."""
        total = sum(c.n_steps for c in self.chains)
        return 100.0 * self.swaps_accepted / total if total else math.nan


def _swap_rounds(config: RunConfig) -> list[int]:
    """Step counts at which the barrier/swap rounds happen."""
    if config.replicas < 2:
        return []
    end = config.per_replica if config.swap_after_switch else config.switch_index
    return list(range(config.swap_interval, end, config.swap_interval))


def coordinate(target, config: RunConfig, backend: str = "auto") -> EnsembleResult:
    """Run the full tempered ensemble and return every replica's chain.

    ``backend`` is ``"serial"`` (all replicas in this process, stepped between
    barriers), ``"process"`` (one worker process per replica) or ``"auto"``
    (processes when more than one CPU and replica are available).
    """
    config.validate()
    t0 = time.perf_counter()
    m = config.replicas
    temps = build_ladder(m, config.t_max)
    seeds = np.random.SeedSequence(config.seed).spawn(m + 1)
    manager_rng = np.random.default_rng(seeds[m])
    if backend == "auto":
        backend = "process" if m > 1 and (os.cpu_count() or 1) > 1 else "serial"
    if config.sample_dir is not None:
        Path(config.sample_dir).mkdir(parents=True, exist_ok=True)

    if backend == "serial":
        be = _SerialBackend([Replica(i, temps[i], target, config, seeds[i]) for i in range(m)])
    elif backend == "process":
        be = _ProcessBackend(temps, target, config, seeds[:m])
    else:
        raise ValueError(f"unknown backend {backend!r}")

    pair_att = np.zeros(max(m - 1, 0), dtype=np.int64)
    pair_acc = np.zeros(max(m - 1, 0), dtype=np.int64)
    try:
        done = 0
        for boundary in _swap_rounds(config):
            log_liks = be.run(boundary - done)
            done = boundary
            round_temps = temps if boundary < config.switch_index else np.ones(m)
            # perm[i]: which worker's state now sits at position i
            perm = list(range(m))
            lls = list(log_liks)
            for i in range(m - 1):
                lp = swap_log_prob(lls[i], lls[i + 1], round_temps[i], round_temps[i + 1])
                u = manager_rng.random()
                pair_att[i] += 1
                if u < math.exp(lp):
                    pair_acc[i] += 1
                    perm[i], perm[i + 1] = perm[i + 1], perm[i]
                    lls[i], lls[i + 1] = lls[i + 1], lls[i]
            moved = [i for i in range(m) if perm[i] != i]
            payloads = {j: be.payload(j) for j in moved}
            for i in moved:
                be.load(i, payloads[perm[i]])
        be.run(config.per_replica - done)
        for i in range(m):
            att = (pair_att[i - 1] if i > 0 else 0) + (pair_att[i] if i < m - 1 else 0)
            acc = (pair_acc[i - 1] if i > 0 else 0) + (pair_acc[i] if i < m - 1 else 0)
            be.add_swap_counts(i, int(att), int(acc))
        chains = be.finish()
    finally:
        be.close()
    return EnsembleResult(
        chains=chains, ladder=temps, config=config,
        swaps_attempted=int(pair_att.sum()), swaps_accepted=int(pair_acc.sum()),
        pair_attempted=pair_att, pair_accepted=pair_acc,
        seconds=time.perf_counter() - t0, backend=backend,
    )
