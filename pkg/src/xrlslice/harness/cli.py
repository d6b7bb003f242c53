"""Command line entry point: ``xrlslice run | export-waterfall | summarize``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from xrlslice import nn
from xrlslice.agent import StateNormalizer
from xrlslice.env import SlicingEnv
from xrlslice.explain import BackgroundSet
from xrlslice.harness.config import MODES, ExperimentConfig, load_config
from xrlslice.harness.runner import build_summary, run_single, write_summary_files
from xrlslice.harness.waterfall import dominant_feature, export_waterfall, write_waterfall_csv

log = logging.getLogger("xrlslice")


def _config(path) -> ExperimentConfig:
    return load_config(path) if path else ExperimentConfig()


def cmd_run(args) -> int:
    cfg = _config(args.config)
    if args.mu is not None:
        cfg = cfg.replace(xai={"mu": args.mu})
    if args.timesteps is not None:
        cfg = cfg.replace(run={"max_timesteps": args.timesteps})
    modes = (args.mode,) if args.mode else (cfg.run.mode,)
    seeds = (args.seed,) if args.seed is not None else cfg.run.seeds
    root = Path(args.out or cfg.run.output_dir)
    for mode in modes:
        for seed in seeds:
            out = root if (args.out and len(seeds) == 1) else root / f"{mode}_seed{seed}"
            summary = run_single(cfg, mode, seed, out)
            print(json.dumps({"out": str(out), **summary.to_json()}, sort_keys=True))
    return 0


def _rollout_states(cfg, slice_idx, n_states, seed):
    """Normalized states for one slice from a uniformly random policy."""
    env = SlicingEnv(cfg.gnb, cfg.slices)
    rng = np.random.default_rng(seed)
    norm = StateNormalizer(cfg.slices[slice_idx].mean_demand_bits, cfg.gnb.capacity_prb)
    obs = env.reset(seed)
    states = []
    while len(states) < n_states:
        states.append(norm(obs[slice_idx]))
        actions = rng.integers(cfg.gnb.num_actions, size=len(cfg.slices)) * cfg.gnb.chunk_prb
        obs, _, _ = env.step(actions)
    return np.array(states), norm


def cmd_export_waterfall(args) -> int:
    cfg = _config(args.config)
    names = cfg.slice_names
    if args.slice not in names:
        raise SystemExit(f"unknown slice {args.slice!r}; choose from {', '.join(names)}")
    net = nn.load(args.checkpoint)
    states, norm = _rollout_states(cfg, names.index(args.slice), args.probes + 200, args.seed)
    rng = np.random.default_rng(args.seed + 1)
    background = BackgroundSet.from_buffer(states[args.probes:], cfg.xai.background_size, rng)
    rows = export_waterfall(net, states[:args.probes], background, cfg.gnb.chunk_prb, norm)
    write_waterfall_csv(rows, args.out)
    print(json.dumps({"out": str(args.out), "rows": len(rows), "dominant_feature": dominant_feature(rows)}))
    return 0


def _load_intervals(path: Path):
    cols = {k: [] for k in ("env_reward", "composite_reward", "latency_s", "drop_fraction")}
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            for k in cols:
                cols[k].append(rec[k])
    return {k: np.array(v, dtype=float) for k, v in cols.items()}


def cmd_summarize(args) -> int:
    """Rebuild summaries from ``intervals.jsonl`` files and write a cross-run comparison."""
    root = Path(args.input)
    runs = sorted(p.parent for p in root.rglob("intervals.jsonl"))
    if not runs:
        raise SystemExit(f"no intervals.jsonl found under {root}")
    table = []
    for run_dir in runs:
        cfg = load_config(run_dir / "config.yaml")
        arrays = _load_intervals(run_dir / "intervals.jsonl")
        s = build_summary(cfg.run.mode, cfg.run.seeds[0], cfg.slice_names, cfg.run.episode_length,
                          cfg.run.eval_fraction, arrays["env_reward"], arrays["composite_reward"],
                          arrays["latency_s"], arrays["drop_fraction"])
        write_summary_files(s, run_dir)
        for name in cfg.slice_names:
            table.append({
                "run": run_dir.name, "mode": s.mode, "seed": s.seed, "slice": name,
                "final_env_reward": s.final_env_reward[name],
                "median_latency_s": s.latency_quantiles[name]["p50"],
                "drop_whisker_high": s.drop_box[name]["whisker_high"],
                "mean_drop": s.drop_box[name]["mean"],
            })
    out = Path(args.out) if args.out else root / "comparison.json"
    out.write_text(json.dumps(table, indent=2))
    for row in table:
        print(f"{row['run']:>16} {row['slice']:>6}  reward {row['final_env_reward']:+.4f}  "
              f"p50 latency {row['median_latency_s'] * 1e3:7.3f} ms  drop whisker {row['drop_whisker_high']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xrlslice", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train slice agents and write metrics")
    r.add_argument("--config", help="YAML config; built-in defaults when omitted")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--seed", type=int)
    r.add_argument("--mu", type=float, help="override the explanation reward weight")
    r.add_argument("--timesteps", type=int, help="override max_timesteps")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=cmd_run)

    w = sub.add_parser("export-waterfall", help="Shapley waterfall rows for a saved Q-network")
    w.add_argument("--checkpoint", required=True)
    w.add_argument("--config")
    w.add_argument("--slice", default="urllc")
    w.add_argument("--probes", type=int, default=16)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_export_waterfall)

    s = sub.add_parser("summarize", help="rebuild statistics from interval logs")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
