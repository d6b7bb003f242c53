"""Seeded multi-agent training runs for the ``rl`` baseline and the explanation-guided ``xrl`` mode."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from xrlslice import nn
from xrlslice.agent import DDQNAgent, StateNormalizer, Transition
from xrlslice.env import SlicingEnv
from xrlslice.explain import BackgroundSet, explain_arrays
from xrlslice.harness.config import ExperimentConfig, dump_config
from xrlslice.harness.stats import summarize_box, summarize_cdf
from xrlslice.harness.waterfall import dominant_feature, export_waterfall, write_waterfall_csv
from xrlslice.xai_reward import batch_xrl_reward, composite_reward

log = logging.getLogger(__name__)

INTERVAL_FIELDS = ("allocated_prb", "granted_prb", "snr_db", "demand_bits", "capacity_bits",
                   "latency_s", "served_bits", "dropped_bits", "drop_fraction", "env_reward")
_STREAMS = ("env", "init", "explore", "buffer", "background", "probe")


@dataclass
class RunSummary:
    mode: str
    seed: int
    slices: tuple
    episode_env_reward: np.ndarray        # (episodes, slices) mean per interval
    episode_composite_reward: np.ndarray  # (episodes, slices)
    final_env_reward: dict                # slice -> mean env reward over the evaluation window
    latency_samples: dict                 # slice -> evaluation-window latencies (s)
    drop_samples: dict                    # slice -> evaluation-window drop fractions
    latency_quantiles: dict = field(default_factory=dict)
    drop_box: dict = field(default_factory=dict)
    duration_s: float = 0.0
    explainer_calls: int = 0
    dominant_features: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "slices": list(self.slices),
            "final_env_reward": self.final_env_reward,
            "latency_quantiles": self.latency_quantiles,
            "drop_box": self.drop_box,
            "duration_s": self.duration_s,
            "explainer_calls": self.explainer_calls,
            "dominant_features": self.dominant_features,
        }


def seed_streams(seed: int) -> dict:
    """Independent random streams per concern, all derived from the master seed."""
    return dict(zip(_STREAMS, np.random.SeedSequence(seed).spawn(len(_STREAMS))))


def build_summary(mode, seed, slice_names, episode_length, eval_fraction, env_reward,
                  comp_reward, latency, drop_fraction, duration_s=0.0, explainer_calls=0) -> RunSummary:
    """Aggregate per-interval arrays of shape ``(T, slices)`` into a :class:`RunSummary`."""
    total = env_reward.shape[0]
    n_ep = -(-total // episode_length)
    ep_idx = np.arange(total) // episode_length
    counts = np.bincount(ep_idx, minlength=n_ep)[:, None]
    ep_env = np.zeros((n_ep, len(slice_names)))
    ep_comp = np.zeros_like(ep_env)
    np.add.at(ep_env, ep_idx, env_reward)
    np.add.at(ep_comp, ep_idx, comp_reward)
    start = total - max(1, int(round(eval_fraction * total)))
    summary = RunSummary(
        mode=mode, seed=seed, slices=tuple(slice_names),
        episode_env_reward=ep_env / counts,
        episode_composite_reward=ep_comp / counts,
        final_env_reward={s: float(env_reward[start:, i].mean()) for i, s in enumerate(slice_names)},
        latency_samples={s: latency[start:, i].copy() for i, s in enumerate(slice_names)},
        drop_samples={s: drop_fraction[start:, i].copy() for i, s in enumerate(slice_names)},
        duration_s=duration_s,
        explainer_calls=explainer_calls,
    )
    for s in slice_names:
        lat = summarize_box(summary.latency_samples[s])
        summary.latency_quantiles[s] = {"p25": lat.p25, "p50": lat.p50, "p75": lat.p75,
                                        "whisker_high": lat.whisker_high, "mean": lat.mean}
        box = summarize_box(summary.drop_samples[s]).as_dict()
        box.pop("outliers")
        summary.drop_box[s] = box
    return summary


def write_summary_files(summary: RunSummary, out: Path) -> None:
    out = Path(out)
    with open(out / "episodes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "slice", "mean_env_reward", "mean_composite_reward"])
        for e in range(summary.episode_env_reward.shape[0]):
            for i, s in enumerate(summary.slices):
                w.writerow([e, s, repr(float(summary.episode_env_reward[e, i])),
                            repr(float(summary.episode_composite_reward[e, i]))])
    for s in summary.slices:
        cdf = summarize_cdf(summary.latency_samples[s])
        np.savetxt(out / f"latency_cdf_{s}.csv", cdf, delimiter=",", header="latency_s,cdf",
                   comments="", fmt="%.17g")
    with open(out / "drop_box.csv", "w", newline="") as fh:
        keys = ["p25", "p50", "p75", "iqr", "whisker_low", "whisker_high", "mean", "n_outliers", "positive_skew"]
        w = csv.writer(fh)
        w.writerow(["slice", *keys])
        for s in summary.slices:
            w.writerow([s, *(summary.drop_box[s][k] for k in keys)])
    (out / "summary.json").write_text(json.dumps(summary.to_json(), indent=2, sort_keys=True))


class _JsonlWriter:
    def __init__(self, path: Path, flush_every: int):
        self._fh = open(path, "w")
        self._pending: list[str] = []
        self._every = flush_every

    def write(self, record: dict) -> None:
        self._pending.append(json.dumps(record, separators=(",", ":")))
        if len(self._pending) >= self._every:
            self.flush()

    def flush(self) -> None:
        if self._pending:
            self._fh.write("\n".join(self._pending) + "\n")
            self._pending.clear()
        self._fh.flush()

    def close(self) -> None:
        self.flush()
        self._fh.close()


def run_single(cfg: ExperimentConfig, mode: str, seed: int, out_dir) -> RunSummary:
    """Train one agent per slice for ``max_timesteps`` intervals and write metrics under ``out_dir``.

    In ``rl`` mode the explainer is never called and the composite weight is
    forced to zero.  In ``xrl`` mode every training iteration explains the
    sampled batch before the gradient step and the resulting reward is used,
    one iteration late, in the next composite reward.
    """
    if mode not in ("rl", "xrl"):
        raise ValueError(f"unknown mode {mode!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg.replace(run={"mode": mode, "seeds": (seed,), "output_dir": str(out)}), out / "config.yaml")

    gnb, run, acfg, xcfg = cfg.gnb, cfg.run, cfg.agent, cfg.xai
    names = cfg.slice_names
    n = len(names)
    mu = xcfg.mu if mode == "xrl" else 0.0
    streams = seed_streams(seed)
    per_agent = {k: streams[k].spawn(n) for k in ("init", "explore", "buffer", "background")}
    agents = [
        DDQNAgent(acfg, gnb.num_actions, 3,
                  init_rng=np.random.default_rng(per_agent["init"][i]),
                  explore_rng=np.random.default_rng(per_agent["explore"][i]),
                  buffer_rng=np.random.default_rng(per_agent["buffer"][i]))
        for i in range(n)
    ]
    bg_rngs = [np.random.default_rng(ss) for ss in per_agent["background"]]
    probe_rng = np.random.default_rng(streams["probe"])
    normalizers = [StateNormalizer(s.mean_demand_bits, gnb.capacity_prb) for s in cfg.slices]
    backgrounds: list[BackgroundSet | None] = [None] * n
    xai_prev = [0.0] * n
    explainer_calls = 0

    probe_idx = names.index(run.probe_slice)
    n_episodes = cfg.num_episodes
    probe_eps = sorted({e % n_episodes for e in run.probe_episodes})
    dominant = {}
    ckpt_dir = out / "checkpoints"

    total = run.max_timesteps
    env_r = np.zeros((total, n))
    comp_r = np.zeros((total, n))
    latency = np.zeros((total, n))
    drops = np.zeros((total, n))
    episode_states = []

    env = SlicingEnv(gnb, cfg.slices)
    obs = env.reset(streams["env"])
    intervals = _JsonlWriter(out / "intervals.jsonl", run.metrics_flush)
    xai_log = _JsonlWriter(out / "xai.jsonl", run.metrics_flush) if mode == "xrl" else None
    started = time.perf_counter()
    try:
        for t in range(total):
            episode, step_in_ep = divmod(t, run.episode_length)
            states = [normalizers[i](obs[i]) for i in range(n)]
            episode_states.append(states[probe_idx])
            actions = [agents[i].select_action(states[i], t) for i in range(n)]
            next_obs, rewards, m = env.step([a * gnb.chunk_prb for a in actions])
            terminal = step_in_ep == run.episode_length - 1 or t == total - 1
            comp = [composite_reward(float(rewards[i]), xai_prev[i], mu) for i in range(n)]
            for i in range(n):
                agents[i].store(Transition(states[i], actions[i], float(rewards[i]),
                                           normalizers[i](next_obs[i]), terminal))

            losses = [None] * n
            if t >= acfg.start_timesteps:
                for i, agent in enumerate(agents):
                    batch = agent.sample()
                    if batch is None:
                        continue
                    if mode == "xrl":
                        if agent.train_iterations % xcfg.background_refresh == 0 or backgrounds[i] is None:
                            backgrounds[i] = BackgroundSet.from_buffer(
                                agent.buffer.states[:len(agent.buffer)], xcfg.background_size, bg_rngs[i])
                        shap, _, _ = explain_arrays(agent.online, batch.states, backgrounds[i], gnb.chunk_prb)
                        explainer_calls += 1
                        r_now, h_max = batch_xrl_reward(shap, xcfg.entropy_floor)
                    losses[i] = agent.learn(batch, xai_prev[i], mu)
                    if mode == "xrl":
                        xai_log.write({"t": t, "slice": names[i], "max_entropy": h_max, "xrl_reward": r_now,
                                       "xrl_reward_prev": xai_prev[i],
                                       "mean_composite": float(np.mean(batch.rewards)) + mu * xai_prev[i]})
                        xai_prev[i] = r_now

            env_r[t] = rewards
            comp_r[t] = comp
            latency[t] = m.latency_s
            drops[t] = m.drop_fraction
            record = {"t": t, "episode": episode}
            for key in INTERVAL_FIELDS:
                record[key] = getattr(m, key).tolist()
            record["composite_reward"] = comp
            record["loss"] = losses
            intervals.write(record)

            if terminal:
                if episode in probe_eps:
                    rows = _probe(agents[probe_idx], normalizers[probe_idx], np.array(episode_states),
                                  run.probe_states, xcfg.background_size, probe_rng, gnb.chunk_prb)
                    write_waterfall_csv(rows, out / f"waterfall_ep{episode}_{run.probe_slice}.csv")
                    dominant[str(episode)] = dominant_feature(rows)
                    if run.checkpoints:
                        ckpt_dir.mkdir(exist_ok=True)
                        for name, agent in zip(names, agents):
                            nn.save(agent.online, ckpt_dir / f"{name}_ep{episode}.qnet")
                episode_states = []
                obs = env.reset()
            else:
                obs = next_obs
    finally:
        intervals.close()
        if xai_log is not None:
            xai_log.close()

    summary = build_summary(mode, seed, names, run.episode_length, run.eval_fraction, env_r, comp_r,
                            latency, drops, time.perf_counter() - started, explainer_calls)
    summary.dominant_features = dominant
    write_summary_files(summary, out)
    (out / "report.json").write_text(json.dumps({
        "mode": mode, "seed": seed, "probe_slice": run.probe_slice,
        "dominant_feature_by_episode": dominant,
        "dominant_feature_shift": len(set(dominant.values())) > 1,
    }, indent=2))
    log.info("%s seed %d done in %.1fs", mode, seed, summary.duration_s)
    return summary


def _probe(agent, normalizer, episode_states, n_probes, bg_size, rng, chunk_prb):
    background = BackgroundSet.from_buffer(agent.buffer.states[:len(agent.buffer)], bg_size, rng)
    probes = episode_states[:n_probes]
    return export_waterfall(agent.online, probes, background, chunk_prb, normalizer)


def run_experiment(cfg: ExperimentConfig, modes=None, out_root=None) -> dict:
    """Run every configured seed for each mode; returns ``{(mode, seed): RunSummary}``."""
    modes = (cfg.run.mode,) if modes is None else tuple(modes)
    root = Path(out_root or cfg.run.output_dir)
    results = {}
    for mode in modes:
        for seed in cfg.run.seeds:
            results[(mode, seed)] = run_single(cfg, mode, seed, root / f"{mode}_seed{seed}")
    return results
