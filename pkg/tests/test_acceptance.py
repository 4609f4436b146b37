"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The Cora criteria run on the synthetic Cora stand-in (same node, edge, class,
feature and split counts) because the real dataset is not shipped with the
package.  Every desk-scale sampler run is cached and shared between criteria.
"""

import math
from functools import lru_cache

import numpy as np
import pytest

from bayes_gcnn.benchmarks import BENCHMARKS, DIAGNOSTIC_WEIGHT_IDS, synthetic_citation_graph
from bayes_gcnn.cli import CliConfig, run
from bayes_gcnn.gcn_model import GCNPosterior, param_count
from bayes_gcnn.posterior import gelman_rubin, pool, psrf, summarize
from bayes_gcnn.proposals import ProposalConfig
from bayes_gcnn.targets import GaussianTarget
from bayes_gcnn.tempering import RunConfig, coordinate, swap_log_prob

from conftest import ACCEPTANCE_LINES, random_dataset

SEEDS = (0, 1, 2)
DESK = dict(replicas=4, max_samples=12_000)


def report(number, title, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


@lru_cache(maxsize=None)
def cora_target():
    return GCNPosterior.from_dataset(synthetic_citation_graph("cora", seed=0))


@lru_cache(maxsize=None)
def desk_run(kind, lg_rate, seed):
    """One reduced-budget run with the command-line defaults for everything else."""
    cli = CliConfig(proposal=kind, lg_rate=lg_rate, seed=seed, **DESK)
    cfg = RunConfig(
        replicas=cli.replicas, max_samples=cli.max_samples, t_max=cli.tmax, swap_interval=cli.swap_interval,
        switch_fraction=cli.switch_fraction, proposal=cli.proposal_config(), seed=seed,
        track=DIAGNOSTIC_WEIGHT_IDS, keep_samples=False,
    )
    res = coordinate(cora_target(), cfg)
    p = pool(res.chains)
    s = summarize(p.train_acc, p.test_acc, res.acceptance_pct, res.swap_pct, res.swap_per_sample_pct,
                  res.seconds / 60)
    print(f"  {kind:8s} rate {lg_rate:4.2f} seed {seed}: {s.table_row()}")
    return res, s


# 1 -------------------------------------------------------------------------

def test_criterion_1_parameter_counts():
    got = {k: param_count(BENCHMARKS[k].topology) for k in ("cora", "citeseer", "pubmed")}
    want = {"cora": 23063, "citeseer": 59366, "pubmed": 8067}
    report(1, "parameter counts", got == want, f"got {got}")


# 2 -------------------------------------------------------------------------

def test_criterion_2_gradient_oracle():
    h = 1e-5
    worst_rel, n_coords, failures = 0.0, 0, 0
    for inst in range(25):
        rng = np.random.default_rng(1000 + inst)
        n = int(rng.integers(4, 21))
        k = int(rng.integers(2, 6))
        hidden = int(rng.integers(2, 9))
        f = int(rng.integers(2, max(3, (600 - hidden - k * hidden - k) // hidden)))
        ds = random_dataset(rng, n=n, f=f, k=k, p_edge=0.3, n_train=max(1, n // 2), n_test=0,
                            dense_features=bool(inst % 2))
        act = ("relu", "tanh", "identity")[inst % 3]
        post = GCNPosterior.from_dataset(ds, hidden=hidden, activation=act)
        assert post.dim <= 600
        theta = rng.standard_normal(post.dim) * 0.7

        def logpost(t):
            # up to the prior's normalizing constant, which has no gradient but inflates round-off
            return post.evaluate(t)["log_lik"] - 0.5 * np.dot(t, t) / post.prior_var

        g = post.grad(theta)
        for i in range(post.dim):
            e = np.zeros(post.dim)
            e[i] = h
            fd = (logpost(theta + e) - logpost(theta - e)) / (2 * h)
            diff = abs(g[i] - fd)
            scale = max(abs(g[i]), abs(fd))
            ok = diff < 1e-8 or diff / scale < 1e-5
            if scale > 1e-3:
                worst_rel = max(worst_rel, diff / scale)
            failures += not ok
            n_coords += 1
    report(2, "gradient matches central differences", failures == 0,
           f"{n_coords} coordinates over 25 instances, {failures} outside tolerance, worst rel {worst_rel:.1e}")


# 3 -------------------------------------------------------------------------

def test_criterion_3_sampler_on_gaussian():
    mean = np.array([1.0, -0.5])
    cov = np.array([[1.0, 0.6], [0.6, 0.5]])
    target = GaussianTarget(mean, cov, init_scale=2.0)
    cfg = RunConfig(replicas=5, max_samples=50_000, t_max=2.0, swap_interval=2,
                    proposal=ProposalConfig(kind="lg", lr=0.1, rw_std=0.8, lg_rate=0.5, q_ratio="exact"),
                    seed=0, track=(0, 1), keep_samples=False)
    res = coordinate(target, cfg)
    p = pool(res.chains)
    x = np.column_stack([p.values(0), p.values(1)])
    mean_err = np.abs(x.mean(0) - mean)
    cov_rel = np.abs(np.cov(x.T) - cov) / np.abs(cov)
    ok = bool(np.all(mean_err < 0.05) and np.all(cov_rel < 0.10))
    report(3, "tempered sampler recovers a 2D Gaussian", ok,
           f"{len(p)} pooled samples, max mean error {mean_err.max():.4f}, max cov rel error {cov_rel.max():.3f}")


# 4 -------------------------------------------------------------------------

def test_criterion_4_swap_rule():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        li, lj = rng.uniform(-2000, 0, 2)
        ti, tj = rng.uniform(1, 5, 2)
        # ratio of joint tempered likelihoods after and before the exchange
        log_beta = (lj / ti + li / tj) - (li / ti + lj / tj)
        expected = min(0.0, log_beta)
        worst = max(worst, abs(swap_log_prob(li, lj, ti, tj) - expected) / max(1.0, abs(expected)))
    equal_cases = [swap_log_prob(-7.5, -7.5, 1.0, 3.0), swap_log_prob(-1.0, -90.0, 1.7, 1.7)]
    ok = worst <= 1e-12 and all(v == 0.0 for v in equal_cases)
    report(4, "swap probability matches the hand expansion", ok,
           f"worst error {worst:.1e}, equal-case log beta {equal_cases}")


# 5 -------------------------------------------------------------------------

def test_criterion_5_desk_cora_accuracy():
    res, s = desk_run("adapt-lg", 0.5, SEEDS[0])
    ok = s.test[1] >= 70.0 and s.test[0] >= 65.0
    report(5, "desk-scale Cora accuracy", ok,
           f"test mean {s.test[0]:.2f} max {s.test[1]:.2f} std {s.test[2]:.2f}, {s.minutes:.1f} min")


# 6 -------------------------------------------------------------------------

def test_criterion_6_proposal_ordering():
    rows, ok = [], True
    for seed in SEEDS:
        a = desk_run("adapt-lg", 0.5, seed)[1].test[0]
        l = desk_run("lg", 0.5, seed)[1].test[0]
        r = desk_run("rw", 0.5, seed)[1].test[0]
        seed_ok = a > l > r and r <= 40.0 and a - l >= 10.0
        ok &= seed_ok
        rows.append(f"seed {seed}: adapt {a:.1f} > lg {l:.1f} > rw {r:.1f}")
    report(6, "adapt-LG > LG > random walk on every seed", ok, "; ".join(rows))


# 7 -------------------------------------------------------------------------

def test_criterion_7_acceptance_band_and_trend():
    rates = (0.25, 0.5, 0.75, 1.0)
    acc = [desk_run("adapt-lg", r, SEEDS[0])[0].acceptance_pct for r in rates]
    noise = np.std([desk_run("adapt-lg", 0.5, s)[0].acceptance_pct for s in SEEDS], ddof=1)
    tol = 2.0 * noise
    monotone = all(b >= a - tol for a, b in zip(acc, acc[1:]))
    in_band = 35.0 <= acc[-1] <= 65.0
    report(7, "acceptance band at rate 1.0 and trend over rates", in_band and monotone,
           f"acceptance % {dict(zip(rates, [round(float(a), 2) for a in acc]))}, band ok {in_band}, "
           f"monotone within {tol:.2f} {monotone}")


# 8 -------------------------------------------------------------------------

def test_criterion_8_convergence():
    res, _ = desk_run("adapt-lg", 0.5, SEEDS[0])
    rhat = {w: gelman_rubin(res.chains, w, 0.6) for w in DIAGNOSTIC_WEIGHT_IDS}
    cora_ok = all(1.0 <= v <= 1.35 for v in rhat.values())
    synth = [psrf(np.random.default_rng(s).standard_normal((8, 1000))) for s in range(5)]
    synth_ok = all(0.99 <= v <= 1.05 for v in synth)
    report(8, "Gelman-Rubin r-hat", cora_ok and synth_ok,
           f"Cora {{{', '.join(f'{w}: {v:.3f}' for w, v in rhat.items())}}}, "
           f"synthetic chains {np.round(synth, 4).tolist()}")


# 9 -------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    from bayes_gcnn.graph_data import save_dataset
    import json

    data = save_dataset(synthetic_citation_graph("cora", seed=0), tmp_path / "cora")
    outs = []
    for i, backend in enumerate(("auto", "serial")):
        out = tmp_path / f"run{i}"
        cfg = CliConfig(dataset_dir=str(data), out_dir=str(out), replicas=2, max_samples=400, seed=7,
                        backend=backend)
        assert run(cfg, log=lambda m: None) == 0
        outs.append(out)
    a, b = outs
    names = sorted(p.name for p in a.iterdir())
    same = names == sorted(p.name for p in b.iterdir())
    mismatched = []
    for name in names:
        if name == "run_summary.json":
            ja, jb = (json.loads((d / name).read_text()) for d in (a, b))
            ja.pop("timing"), jb.pop("timing")
            if ja != jb:
                mismatched.append(name)
        elif name == "report.txt":
            strip = lambda d: [ln.rsplit(None, 1)[0] for ln in (d / name).read_text().splitlines()]
            if strip(a) != strip(b):
                mismatched.append(name)
        elif (a / name).read_bytes() != (b / name).read_bytes():
            mismatched.append(name)
    report(9, "repeated runs are byte-identical", same and not mismatched,
           f"{len(names)} files compared, mismatched {mismatched}")


# 10 ------------------------------------------------------------------------

def test_criterion_10_property_suites():
    import test_gcn_model as gm
    import test_graph_data as gd
    import test_posterior as po
    import test_proposals as pr
    import test_tempering as te

    suites = {
        "softmax normalization": gm.test_softmax_rows_normalize,
        "flatten round-trip": gm.test_flatten_round_trip,
        "operator properties": gd.test_operator_properties_on_random_graphs,
        "swap multiset conservation": te.test_swap_event_conserves_multiset_and_temperatures,
        "swap symmetry": te.test_swap_log_prob_is_symmetric_in_pair_order,
        "ladder construction": te.test_ladder_invariants,
        "discrete-target stationarity": pr.test_discrete_three_state_stationarity,
        "tempered acceptance monotonicity": pr.test_acceptance_non_decreasing_in_temperature,
        "adapt step determinism": pr.test_adapt_step_deterministic,
        "r-hat affine invariance": po.test_psrf_affine_invariance,
        "pooled statistics recount": po.test_pooled_stats_match_flat_loop,
    }
    failed = []
    for name, fn in suites.items():
        try:
            fn()
        except Exception as exc:  # collect every failure before reporting
            failed.append(f"{name}: {type(exc).__name__}")
    report(10, "module property suites", not failed, f"{len(suites) - len(failed)}/{len(suites)} pass {failed}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
