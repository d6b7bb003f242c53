"""Per-slice double-DQN agent over the chunked PRB action space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from xrlslice.env import SliceObservation
from xrlslice.nn import AdamConfig, DivergenceError, QNetwork, soft_update
from xrlslice.xai_reward import composite_reward

SNR_SCALE_DB = 40.0


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 32
    tau: float = 0.005
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 10_000
    start_timesteps: int = 1_000
    buffer_capacity: int = 20_000
    hidden: tuple = (24, 24)
    grad_clip: float | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if not 0 < self.batch_size <= self.buffer_capacity:
            raise ValueError("batch_size must be positive and no larger than buffer_capacity")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.epsilon_decay_steps <= 0 or self.start_timesteps < 0:
            raise ValueError("epsilon_decay_steps must be positive and start_timesteps nonnegative")
        if len(self.hidden) != 2:
            raise ValueError("hidden must give exactly two layer widths")

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(learning_rate=self.learning_rate, grad_clip=self.grad_clip)

    def epsilon(self, step: int) -> float:
        """Linear decay that starts once warm-up ends and then holds at ``epsilon_end``."""
        frac = min(1.0, max(0, step - self.start_timesteps) / self.epsilon_decay_steps)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class StateNormalizer:
    """Maps an observation to ``[snr_db / 40, demand / (2 * mean), remaining / C]``."""

    def __init__(self, mean_demand_bits: float, capacity_prb: int):
        self.demand_scale = 2.0 * mean_demand_bits
        self.capacity_prb = capacity_prb
        self.scale = np.array([SNR_SCALE_DB, self.demand_scale, float(capacity_prb)])

    def __call__(self, obs: SliceObservation) -> np.ndarray:
        return np.array([obs.snr_db, obs.demand_bits, obs.remaining_capacity_prb]) / self.scale

    def denormalize(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.scale


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action_index: int
    env_reward: float
    next_state: np.ndarray
    terminal: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer of normalized transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        i = self._next
        self.states[i] = t.state
        self.actions[i] = t.action_index
        self.rewards[i] = t.env_reward
        self.next_states[i] = t.next_state
        self.terminals[i] = t.terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=n)

    def gather(self, idx) -> Batch:
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.terminals[idx])

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        return self.gather(self.indices(n, rng))


def double_q_targets(online: QNetwork, target: QNetwork, rewards, next_states, terminals, gamma: float):
    """y = r + gamma * Q_target(s', argmax_a Q_online(s', a)), or y = r at terminal states."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.size == 0:
        raise ValueError("empty batch")
    best = online.greedy(next_states)
    q_next = target.forward(next_states)[np.arange(rewards.size), best]
    y = rewards + gamma * np.where(np.asarray(terminals, dtype=bool), 0.0, q_next)
    if not np.all(np.isfinite(y)):
        raise DivergenceError("non-finite double-Q target")
    return y


class DDQNAgent:
    """Online/target Q-networks, replay buffer and epsilon-greedy policy for one slice."""

    def __init__(self, config: AgentConfig, num_actions: int, state_dim: int = 3, *,
                 init_rng: np.random.Generator, explore_rng: np.random.Generator,
                 buffer_rng: np.random.Generator):
        self.config = config
        self.num_actions = num_actions
        dims = (state_dim, *config.hidden, num_actions)
        self.online = QNetwork.initialize(dims, init_rng)
        self.target = self.online.copy()
        self.buffer = ReplayBuffer(config.buffer_capacity, state_dim)
        self.explore_rng = explore_rng
        self.buffer_rng = buffer_rng
        self.train_iterations = 0

    def select_action(self, state, step: int, epsilon: float | None = None) -> int:
        """Uniform during warm-up, epsilon-greedy afterwards (ties to the lowest index).

        The exploration draw is taken on every call so the random stream
        advances identically whatever the network outputs.
        """
        rng = self.explore_rng
        if step < self.config.start_timesteps:
            return int(rng.integers(self.num_actions))
        eps = self.config.epsilon(step) if epsilon is None else epsilon
        explore = rng.random() < eps
        random_action = int(rng.integers(self.num_actions))
        if explore:
            return random_action
        return int(self.online.greedy(state))

    def store(self, transition: Transition) -> None:
        self.buffer.add(transition)

    def sample(self) -> Batch | None:
        if len(self.buffer) < self.config.batch_size:
            return None
        return self.buffer.sample(self.config.batch_size, self.buffer_rng)

    def compute_targets(self, batch: Batch, rewards=None) -> np.ndarray:
        r = batch.rewards if rewards is None else rewards
        return double_q_targets(self.online, self.target, r, batch.next_states,
                                batch.terminals, self.config.gamma)

    def learn(self, batch: Batch, xai_reward_prev: float = 0.0, mu: float = 0.0) -> float:
        """One gradient step on a sampled batch followed by the soft target update.

        The buffer keeps raw environment rewards; the explanation bonus from
        the previous iteration is added here, at training time.
        """
        rewards = composite_reward(batch.rewards, xai_reward_prev, mu)
        y = self.compute_targets(batch, rewards)
        loss = self.online.train_step(batch.states, batch.actions, y, self.config.adam)
        soft_update(self.target, self.online, self.config.tau)
        self.train_iterations += 1
        return loss

    def train_iteration(self, xai_reward_prev: float = 0.0, mu: float = 0.0):
        """Sample and learn.  Returns ``(loss, batch_states)`` or ``None`` if the buffer is too small."""
        batch = self.sample()
        if batch is None:
            return None
        return self.learn(batch, xai_reward_prev, mu), batch.states
