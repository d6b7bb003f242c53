"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line in the terminal summary.

Criteria 7-10 share one full-scale experiment (3 seeds x {rl, xrl}, 300 episodes x 100 intervals),
which takes several minutes on a single core.
"""

import math
import time

import numpy as np
import pytest

from xrlslice.agent import double_q_targets
from xrlslice.env import GnbConfig, SlicingEnv, DEFAULT_SLICES
from xrlslice.explain import exact_shapley, exact_shapley_model
from xrlslice.harness.config import ExperimentConfig
from xrlslice.harness.runner import run_single
from xrlslice.harness.waterfall import read_waterfall_csv
from xrlslice.nn import QNetwork
from xrlslice.xai_reward import attribution_softmax, composite_reward, shannon_entropy, xrl_reward

REPORT: list[str] = []
SEEDS = (0, 1, 2)
DIMS = (3, 24, 24, 11)


def record(cid: int, ok: bool, title: str, detail: str) -> None:
    REPORT.append(f"[{'PASS' if ok else 'FAIL'}] C{cid:<2} {title}: {detail}")
    assert ok, detail


def test_c01_shap_exactness():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_add = worst_lin = 0.0
    dummy_ok = True
    n = 200
    for _ in range(n):
        net = QNetwork.initialize(DIMS, rng)
        net.theta *= rng.uniform(1, 4)
        x = rng.uniform(-1, 2, 3)
        bg = rng.uniform(-1, 2, (int(rng.integers(1, 17)), 3))
        att = exact_shapley(net, x, bg, 10)
        worst_add = max(worst_add, abs(att.shap_values.sum() - (att.fx - att.base_value)))

        w = rng.normal(size=3)
        lin = exact_shapley_model(lambda rows: rows @ w, x, bg)
        worst_lin = max(worst_lin, np.max(np.abs(lin.shap_values - w * (x - bg.mean(axis=0)))))

        dead = int(rng.integers(3))
        net.layers()[0][dead, :] = 0.0
        dummy_ok &= exact_shapley(net, x, bg, 10).shap_values[dead] == 0.0
    elapsed = time.perf_counter() - t0
    ok = worst_add < 1e-6 and worst_lin < 1e-9 and dummy_ok and elapsed < 10
    record(1, ok, "SHAP exactness",
           f"{n} instances, additivity {worst_add:.1e}, linear {worst_lin:.1e}, dummy zero {dummy_ok}, {elapsed:.2f}s")


def test_c02_gradient_correctness():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    h = 1e-5   # loss is piecewise quadratic per parameter; larger steps cross ReLU kinks
    worst = 0.0
    for _ in range(100):
        net = QNetwork.initialize(DIMS, rng)
        m = int(rng.integers(1, 33))
        x, a, y = rng.normal(size=(m, 3)), rng.integers(0, 11, m), rng.normal(size=m)
        _, grad = net.loss_and_grad(x, a, y)
        fd = np.empty_like(grad)
        for i in range(grad.size):
            keep = net.theta[i]
            net.theta[i] = keep + h
            up, _ = net.loss_and_grad(x, a, y)
            net.theta[i] = keep - h
            down, _ = net.loss_and_grad(x, a, y)
            net.theta[i] = keep
            fd[i] = (up - down) / (2 * h)
        rel = np.abs(grad - fd) / np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-6)
        worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - t0
    record(2, worst < 1e-4 and elapsed < 30, "gradient correctness",
           f"100 nets, max elementwise relative error {worst:.2e}, {elapsed:.1f}s")


def test_c03_entropy_reward_algebra():
    h = shannon_entropy(attribution_softmax([0.0, 0.0, 0.0]))
    r = xrl_reward([h])
    clamp_below = xrl_reward([9.99e-4]) == 1e3 and xrl_reward([0.0]) == 1e3
    clamp_above = xrl_reward([2e-3]) == pytest.approx(500.0)
    rng = np.random.default_rng(303)
    bit_exact = all(composite_reward(v, float(rng.uniform(0, 1e3)), 0.0) == v for v in rng.normal(size=1000))
    ok = abs(h - math.log(3)) <= 1e-9 and abs(r - 1 / math.log(3)) <= 1e-9 and clamp_below \
        and clamp_above and bit_exact
    record(3, ok, "entropy/reward algebra",
           f"H-ln3 {h - math.log(3):.1e}, r-1/ln3 {r - 1 / math.log(3):.1e}, clamp {clamp_below and clamp_above}, "
           f"mu=0 bit-exact {bit_exact}")


def test_c04_environment_invariants():
    gnb = GnbConfig()
    env = SlicingEnv(gnb, DEFAULT_SLICES)
    rng = np.random.default_rng(404)
    env.reset(404)
    sla = np.array([s.sla_latency_s for s in DEFAULT_SLICES])
    t0 = time.perf_counter()
    steps = 100_000
    worst_cons = over_cap = over_sla = 0
    for _ in range(steps):
        _, _, m = env.step(rng.integers(0, gnb.num_actions, 3) * gnb.chunk_prb)
        over_cap += m.granted_prb.sum() > gnb.capacity_prb
        over_sla += np.any(m.latency_s > sla)
        denom = np.maximum(m.demand_bits, 1.0)
        worst_cons = max(worst_cons, float(np.max(np.abs(m.served_bits + m.dropped_bits - m.demand_bits) / denom)))
    elapsed = time.perf_counter() - t0
    ok = over_cap == 0 and over_sla == 0 and worst_cons <= 1e-9 and elapsed < 60
    record(4, ok, "environment invariants",
           f"{steps} steps, capacity violations {over_cap}, SLA violations {over_sla}, "
           f"conservation {worst_cons:.1e}, {elapsed:.1f}s")


def _chain(w3, b3=(0.0, 0.0)):
    net = QNetwork((1, 1, 1, 2))
    w1, _, w2, _, w3_, b3_ = net.layers()
    w1[0, 0] = w2[0, 0] = 1.0
    w3_[0, :], b3_[:] = w3, b3
    return net


def test_c05_double_q_semantics():
    online = _chain([2.0, 1.0])     # argmax action 0 at s' = 1
    target = _chain([3.0, 5.0])     # target's own argmax would be action 1
    y = double_q_targets(online, target, [1.0], [[1.0]], [False], 0.9)[0]
    disagree_ok = abs(y - 3.7) < 1e-9
    online2 = _chain([1.0, -1.0], (0.0, 3.0))
    target2 = _chain([0.5, 2.0], (1.0, 0.0))
    ys = double_q_targets(online2, target2, [0.1, 0.2, 0.3], [[1.0], [4.0], [2.0]], [False, False, True], 0.5)
    hand = np.array([0.1 + 0.5 * 2.0, 0.2 + 0.5 * 3.0, 0.3])
    err = float(np.max(np.abs(ys - hand)))
    record(5, disagree_ok and err < 1e-9, "double-Q semantics",
           f"disagreeing nets y={y:.12g} (expect 3.7), hand-computed batch error {err:.1e}")


def _scaled_config(**xai):
    return ExperimentConfig().replace(xai=xai) if xai else ExperimentConfig()


def test_c06_baseline_degeneracy(tmp_path):
    # shorter horizon than the full runs; still 4000 training iterations past warm-up
    short = {"max_timesteps": 5000}
    same = []
    for seed in SEEDS:
        a = run_single(_scaled_config().replace(run=short), "rl", seed, tmp_path / f"rl{seed}")
        b = run_single(_scaled_config(mu=0.0).replace(run=short), "xrl", seed, tmp_path / f"xrl{seed}")
        assert b.explainer_calls > 0
        same.append((tmp_path / f"rl{seed}" / "intervals.jsonl").read_bytes()
                    == (tmp_path / f"xrl{seed}" / "intervals.jsonl").read_bytes())
    record(6, all(same), "baseline degeneracy",
           f"xrl(mu=0) vs rl interval streams identical per seed {same} (5000 intervals each)")


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("full")
    cfg = _scaled_config()
    assert cfg.num_episodes == 300 and cfg.run.episode_length == 100 and cfg.xai.mu == 0.5
    out = {}
    for seed in SEEDS:
        for mode in ("rl", "xrl"):
            out[(mode, seed)] = run_single(cfg, mode, seed, root / f"{mode}_seed{seed}")
    return root, out


def test_c07_convergence_direction(full_runs):
    _, runs = full_runs
    rl = [runs[("rl", s)].final_env_reward["embb"] for s in SEEDS]
    xrl = [runs[("xrl", s)].final_env_reward["embb"] for s in SEEDS]
    budget = max(r.duration_s for r in runs.values())
    ok = np.mean(xrl) >= np.mean(rl) and budget <= 1800
    record(7, ok, "eMBB final-20% env reward xrl >= rl",
           f"xrl mean {np.mean(xrl):.4f} {np.round(xrl, 4).tolist()} vs rl mean {np.mean(rl):.4f} "
           f"{np.round(rl, 4).tolist()}; longest run {budget:.0f}s")


def test_c08_latency_direction(full_runs):
    _, runs = full_runs
    rl = [runs[("rl", s)].latency_quantiles["urllc"]["p50"] for s in SEEDS]
    xrl = [runs[("xrl", s)].latency_quantiles["urllc"]["p50"] for s in SEEDS]
    wins = sum(x < r for x, r in zip(xrl, rl))
    record(8, wins >= 2, "URLLC median latency xrl < rl",
           f"{wins}/3 seeds; xrl {[f'{v * 1e3:.3f}ms' for v in xrl]} vs rl {[f'{v * 1e3:.3f}ms' for v in rl]}")


def test_c09_drop_direction(full_runs):
    _, runs = full_runs
    rl = [runs[("rl", s)].drop_box["mmtc"] for s in SEEDS]
    xrl = [runs[("xrl", s)].drop_box["mmtc"] for s in SEEDS]
    wins = sum(x["whisker_high"] <= r["whisker_high"] for x, r in zip(xrl, rl))
    detail = (f"{wins}/3 seeds; whisker xrl {[x['whisker_high'] for x in xrl]} vs rl {[r['whisker_high'] for r in rl]}; "
              f"mean drop xrl {[round(x['mean'], 4) for x in xrl]} vs rl {[round(r['mean'], 4) for r in rl]}")
    record(9, wins >= 2, "mMTC drop whisker xrl <= rl", detail)


def test_c10_waterfall_exports(full_runs):
    root, runs = full_runs
    worst = 0.0
    fx_ok = True
    shifts = {}
    for (mode, seed), summary in runs.items():
        for ep in (10, 299):
            rows = read_waterfall_csv(root / f"{mode}_seed{seed}" / f"waterfall_ep{ep}_urllc.csv")
            assert rows
            for r in rows:
                total = r["shap_snr"] + r["shap_served_traffic"] + r["shap_remaining_capacity"]
                worst = max(worst, abs(total - (r["fx"] - r["base_value"])))
                fx_ok &= 0.0 <= r["fx"] <= 100.0
        shifts[f"{mode}{seed}"] = f"{summary.dominant_features['10']}->{summary.dominant_features['299']}"
    record(10, worst < 1e-6 and fx_ok, "waterfall exports",
           f"additivity {worst:.1e}, fx in [0,100] {fx_ok}, dominant feature ep10->ep299 {shifts}")
