"""Experiment configuration, loaded from YAML that mirrors the dataclasses field for field."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from xrlslice.agent import AgentConfig
from xrlslice.env import DEFAULT_SLICES, GnbConfig, SliceSpec
from xrlslice.xai_reward import XaiConfig

OUT_DIR_ENV = "XRLSLICE_OUT"
MODES = ("rl", "xrl")


@dataclass(frozen=True)
class RunControls:
    max_timesteps: int = 30_000
    episode_length: int = 100
    seeds: tuple = (0, 1, 2)
    mode: str = "xrl"
    output_dir: str = "runs"
    metrics_flush: int = 1_000
    # fraction of the final training intervals used for latency / drop statistics
    eval_fraction: float = 0.2
    # episodes (0-based) after which waterfall data is exported; negative counts from the end
    probe_episodes: tuple = (10, -1)
    probe_slice: str = "urllc"
    probe_states: int = 16
    checkpoints: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    gnb: GnbConfig = field(default_factory=GnbConfig)
    slices: tuple = DEFAULT_SLICES
    agent: AgentConfig = field(default_factory=AgentConfig)
    xai: XaiConfig = field(default_factory=XaiConfig)
    run: RunControls = field(default_factory=RunControls)

    def __post_init__(self):
        r = self.run
        if not r.seeds:
            raise ValueError("at least one seed is required")
        if r.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {r.mode!r}")
        if r.max_timesteps <= self.agent.start_timesteps:
            raise ValueError("max_timesteps must exceed start_timesteps")
        if r.episode_length <= 0 or r.metrics_flush <= 0:
            raise ValueError("episode_length and metrics_flush must be positive")
        if not 0.0 < r.eval_fraction <= 1.0:
            raise ValueError("eval_fraction must be in (0, 1]")
        if len(self.slices) != self.gnb.num_slices:
            raise ValueError(f"gnb.num_slices={self.gnb.num_slices} but {len(self.slices)} slices configured")
        if r.probe_slice not in self.slice_names:
            raise ValueError(f"probe_slice {r.probe_slice!r} is not a configured slice")

    @property
    def slice_names(self) -> tuple:
        return tuple(s.name for s in self.slices)

    @property
    def num_episodes(self) -> int:
        return -(-self.run.max_timesteps // self.run.episode_length)

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with some section fields changed, e.g. ``replace(run={"mode": "rl"})``."""
        updates = {}
        for name, changes in sections.items():
            current = getattr(self, name)
            updates[name] = dataclasses.replace(current, **changes) if isinstance(changes, dict) else changes
        return dataclasses.replace(self, **updates)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["slices"] = [dataclasses.asdict(s) for s in self.slices]
        for section, key in (("agent", "hidden"), ("run", "seeds"), ("run", "probe_episodes")):
            d[section][key] = list(d[section][key])
        return d


def _section(cls, raw, name):
    raw = raw or {}
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown {name} field(s): {sorted(unknown)}")
    values = {}
    for k, v in raw.items():
        values[k] = tuple(v) if isinstance(v, list) else v
    return cls(**values)


def from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw or {})
    unknown = set(raw) - {"gnb", "slices", "agent", "xai", "run"}
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")
    slices = DEFAULT_SLICES
    if raw.get("slices") is not None:
        slices = tuple(_section(SliceSpec, s, "slice") for s in raw["slices"])
    gnb_raw = dict(raw.get("gnb") or {})
    gnb_raw.setdefault("num_slices", len(slices))
    return ExperimentConfig(
        gnb=_section(GnbConfig, gnb_raw, "gnb"),
        slices=slices,
        agent=_section(AgentConfig, raw.get("agent"), "agent"),
        xai=_section(XaiConfig, raw.get("xai"), "xai"),
        run=_section(RunControls, raw.get("run"), "run"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        cfg = from_dict(yaml.safe_load(fh))
    override = os.environ.get(OUT_DIR_ENV)
    if override:
        cfg = cfg.replace(run={"output_dir": override})
    return cfg


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
