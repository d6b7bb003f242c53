"""Fluid, interval-based simulator of one gNB shared by several slices.

Each decision interval every slice receives a Poisson traffic burst and an
exponentially distributed (Rayleigh-faded) average SNR.  PRB requests are
granted in slice order and clipped to what is left of the cell capacity.
Traffic that cannot be delivered within the slice latency budget is dropped
inside the same interval; nothing is carried over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

SNR_FLOOR_LINEAR = 1e-6


class InvalidActionError(ValueError):
    """An agent proposed a PRB count outside the chunked action space."""


@dataclass(frozen=True)
class GnbConfig:
    capacity_prb: int = 100
    chunk_prb: int = 10
    prb_bandwidth_hz: float = 180e3
    interval_seconds: float = 1.0
    num_slices: int = 3
    demand_unit_bits: float = 1e4
    # "sla": gap against demand / latency budget; "interval": demand / interval length
    gap_reference: str = "sla"
    # "chunk": reward evaluated on the gap measured in one-chunk capacities; "raw": bits/s
    reward_units: str = "chunk"

    def __post_init__(self):
        if self.capacity_prb <= 0 or self.chunk_prb <= 0:
            raise ValueError("capacity_prb and chunk_prb must be positive")
        if self.capacity_prb % self.chunk_prb:
            raise ValueError("chunk_prb must divide capacity_prb")
        if self.interval_seconds <= 0 or self.prb_bandwidth_hz <= 0:
            raise ValueError("interval_seconds and prb_bandwidth_hz must be positive")
        if self.num_slices <= 0:
            raise ValueError("num_slices must be positive")
        if self.demand_unit_bits <= 0:
            raise ValueError("demand_unit_bits must be positive")
        if self.gap_reference not in ("sla", "interval"):
            raise ValueError(f"gap_reference must be 'sla' or 'interval', got {self.gap_reference!r}")
        if self.reward_units not in ("chunk", "raw"):
            raise ValueError(f"reward_units must be 'chunk' or 'raw', got {self.reward_units!r}")

    @property
    def num_actions(self) -> int:
        return self.capacity_prb // self.chunk_prb + 1


@dataclass(frozen=True)
class SliceSpec:
    name: str
    sla_latency_s: float
    mean_demand_bits: float
    mean_snr_db: float = 25.0

    def __post_init__(self):
        if self.sla_latency_s <= 0:
            raise ValueError(f"{self.name}: sla_latency_s must be positive")
        if self.mean_demand_bits <= 0:
            raise ValueError(f"{self.name}: mean_demand_bits must be positive")


DEFAULT_SLICES = (
    SliceSpec("urllc", 0.010, 7.0e4),
    SliceSpec("embb", 0.040, 2.8e5),
    SliceSpec("mmtc", 0.020, 1.4e5),
)


@dataclass(frozen=True)
class SliceObservation:
    snr_db: float
    demand_bits: float
    remaining_capacity_prb: int


class ServeResult(NamedTuple):
    latency_s: float
    served_bits: float
    dropped_bits: float
    drop_rate_bps: float


@dataclass
class StepMetrics:
    """Per-slice outcome of one interval.  Array fields are indexed by slice."""

    t: int
    allocated_prb: np.ndarray
    granted_prb: np.ndarray
    snr_db: np.ndarray
    demand_bits: np.ndarray
    capacity_bits: np.ndarray
    latency_s: np.ndarray
    served_bits: np.ndarray
    dropped_bits: np.ndarray
    drop_fraction: np.ndarray
    alpha_gap: np.ndarray
    env_reward: np.ndarray = field(repr=False)


def gamma_capacity(prbs, snr_db, prb_bandwidth_hz: float = 180e3):
    """Shannon capacity in bits/s of ``prbs`` PRBs at an average SNR in dB."""
    return prbs * prb_bandwidth_hz * np.log2(1.0 + 10.0 ** (np.asarray(snr_db) / 10.0))


def sample_demand(spec: SliceSpec, rng: np.random.Generator, unit_bits: float = 1e4) -> float:
    return float(rng.poisson(spec.mean_demand_bits / unit_bits)) * unit_bits


def sample_snr(spec: SliceSpec, rng: np.random.Generator) -> float:
    # Rayleigh amplitude squared is exponential with mean 2 * scale**2.
    mean_linear = 10.0 ** (spec.mean_snr_db / 10.0)
    amplitude = rng.rayleigh(scale=math.sqrt(mean_linear / 2.0))
    return 10.0 * math.log10(max(amplitude * amplitude, SNR_FLOOR_LINEAR))


def serve_interval(demand_bits, prbs, snr_db, sla_latency_s, prb_bandwidth_hz=180e3) -> ServeResult:
    """Deliver one interval's burst at rate Gamma, dropping whatever misses the budget.

    When the burst cannot drain within ``sla_latency_s`` the dropped rate ``d``
    satisfies ``demand / (Gamma + d) == sla_latency_s`` so the reported latency
    sits exactly on the budget.
    """
    if demand_bits <= 0:
        return ServeResult(0.0, 0.0, 0.0, 0.0)
    rate = float(gamma_capacity(prbs, snr_db, prb_bandwidth_hz))
    if rate <= 0.0:
        return ServeResult(sla_latency_s, 0.0, float(demand_bits), demand_bits / sla_latency_s)
    latency = demand_bits / rate
    if latency <= sla_latency_s:
        return ServeResult(latency, float(demand_bits), 0.0, 0.0)
    served = rate * sla_latency_s
    dropped = demand_bits - served
    return ServeResult(sla_latency_s, served, dropped, demand_bits / sla_latency_s - rate)


def piecewise_reward(alpha: float, rho_lower: float, rho_up: float) -> float:
    if alpha < rho_lower:
        return alpha - 4.0 * rho_lower
    if alpha <= rho_up:
        frac = alpha / rho_up
        return (1.0 - frac) * frac
    return -(alpha - rho_up)


def env_reward(alpha_gap_bps: float, snr_db: float, gnb: GnbConfig = GnbConfig()) -> float:
    """Allocation-gap reward with bounds set by the capacity of one PRB chunk.

    With ``g = Gamma(chunk, snr)`` the bounds are ``[-g, 2g]``.  In ``raw`` units
    the gap enters in bits/s; in ``chunk`` units it is first divided by ``g``,
    which keeps the linear branches on the same scale as the quadratic one.
    """
    g = float(gamma_capacity(gnb.chunk_prb, snr_db, gnb.prb_bandwidth_hz))
    if gnb.reward_units == "raw":
        return piecewise_reward(alpha_gap_bps, -g, 2.0 * g)
    return piecewise_reward(alpha_gap_bps / g, -1.0, 2.0)


class SlicingEnv:
    """One gNB, ``len(slices)`` slices, one PRB decision per slice per interval."""

    def __init__(self, gnb: GnbConfig = GnbConfig(), slices: Sequence[SliceSpec] = DEFAULT_SLICES):
        if len(slices) != gnb.num_slices:
            raise ValueError(f"gnb.num_slices={gnb.num_slices} but {len(slices)} slices given")
        self.gnb = gnb
        self.slices = tuple(slices)
        self.actions = np.arange(gnb.num_actions) * gnb.chunk_prb
        self._traffic_rng: np.random.Generator | None = None
        self._channel_rng: np.random.Generator | None = None
        self._obs: list[SliceObservation] = []
        self.t = 0

    @property
    def observations(self) -> list[SliceObservation]:
        return list(self._obs)

    def _sample(self, remaining: Sequence[int]) -> list[SliceObservation]:
        out = []
        for spec, nu in zip(self.slices, remaining):
            demand = sample_demand(spec, self._traffic_rng, self.gnb.demand_unit_bits)
            snr = sample_snr(spec, self._channel_rng)
            out.append(SliceObservation(snr, demand, int(nu)))
        return out

    def reset(self, seed=None) -> list[SliceObservation]:
        """Start a new episode.  Reseeds only when ``seed`` is given.

        ``seed`` may be an int or a ``numpy.random.SeedSequence``.
        """
        if seed is not None or self._traffic_rng is None:
            ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
            traffic, channel = ss.spawn(2)
            self._traffic_rng = np.random.default_rng(traffic)
            self._channel_rng = np.random.default_rng(channel)
        self.t = 0
        self._obs = self._sample([self.gnb.capacity_prb] * len(self.slices))
        return list(self._obs)

    def _check_action(self, prbs) -> int:
        value = int(prbs)
        if value != prbs or value % self.gnb.chunk_prb or not 0 <= value <= self.gnb.capacity_prb:
            raise InvalidActionError(
                f"{prbs!r} PRBs is not a multiple of {self.gnb.chunk_prb} in [0, {self.gnb.capacity_prb}]"
            )
        return value

    def step(self, actions: Sequence[int]):
        """Apply one PRB request per slice.

        Returns ``(next_observations, env_rewards, metrics)``.
        """
        if not self._obs:
            raise RuntimeError("reset() must be called before step()")
        if len(actions) != len(self.slices):
            raise InvalidActionError(f"expected {len(self.slices)} actions, got {len(actions)}")
        requested = [self._check_action(a) for a in actions]

        n = len(self.slices)
        gnb = self.gnb
        granted = np.zeros(n, dtype=np.int64)
        remaining_before = np.zeros(n, dtype=np.int64)
        left = gnb.capacity_prb
        for i, req in enumerate(requested):
            remaining_before[i] = left
            granted[i] = min(req, left)
            left -= granted[i]

        snr = np.array([o.snr_db for o in self._obs])
        demand = np.array([o.demand_bits for o in self._obs])
        rate = gamma_capacity(granted, snr, gnb.prb_bandwidth_hz)
        latency = np.zeros(n)
        served = np.zeros(n)
        dropped = np.zeros(n)
        alpha = np.zeros(n)
        reward = np.zeros(n)
        for i, spec in enumerate(self.slices):
            res = serve_interval(demand[i], granted[i], snr[i], spec.sla_latency_s, gnb.prb_bandwidth_hz)
            latency[i], served[i], dropped[i] = res.latency_s, res.served_bits, res.dropped_bits
            horizon = spec.sla_latency_s if gnb.gap_reference == "sla" else gnb.interval_seconds
            alpha[i] = rate[i] - demand[i] / horizon
            reward[i] = env_reward(alpha[i], snr[i], gnb)

        with np.errstate(invalid="ignore", divide="ignore"):
            drop_fraction = np.where(demand > 0, dropped / np.where(demand > 0, demand, 1.0), 0.0)
        metrics = StepMetrics(
            t=self.t,
            allocated_prb=np.asarray(requested, dtype=np.int64),
            granted_prb=granted,
            snr_db=snr,
            demand_bits=demand,
            capacity_bits=rate * gnb.interval_seconds,
            latency_s=latency,
            served_bits=served,
            dropped_bits=dropped,
            drop_fraction=drop_fraction,
            alpha_gap=alpha,
            env_reward=reward,
        )
        self.t += 1
        self._obs = self._sample(remaining_before)
        return list(self._obs), reward, metrics
