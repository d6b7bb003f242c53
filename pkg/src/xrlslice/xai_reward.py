"""Entropy mapper: Shapley attributions -> attribution entropy -> explanation reward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class XaiConfig:
    mu: float = 0.5
    entropy_floor: float = 1e-3
    background_size: int = 16
    background_refresh: int = 250

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if self.entropy_floor <= 0:
            raise ValueError(f"entropy_floor must be positive, got {self.entropy_floor}")
        if self.background_size <= 0 or self.background_refresh <= 0:
            raise ValueError("background_size and background_refresh must be positive")


def attribution_softmax(shap_values) -> np.ndarray:
    """Softmax over absolute attributions along the last axis.

    Accepts one attribution vector or a ``(batch, features)`` array.
    """
    a = np.abs(np.asarray(shap_values, dtype=np.float64))
    if a.shape[-1] < 2:
        raise ValueError("need at least two features")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite attribution")
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def shannon_entropy(p) -> np.ndarray | float:
    """Natural-log entropy along the last axis."""
    p = np.asarray(p, dtype=np.float64)
    h = -np.sum(p * np.log(p), axis=-1)
    return float(h) if h.ndim == 0 else h


def xrl_reward(entropies, entropy_floor: float = 1e-3) -> float:
    """Inverse of the largest entropy in the batch, floored to stay finite."""
    h = np.asarray(entropies, dtype=np.float64)
    if h.size == 0:
        raise ValueError("empty entropy batch")
    return 1.0 / max(float(h.max()), entropy_floor)


def composite_reward(env_reward, xrl_reward_prev: float, mu: float):
    """env_reward + mu * xrl_reward_prev; returns ``env_reward`` itself when mu is zero."""
    if mu == 0:
        return env_reward
    return env_reward + mu * xrl_reward_prev


def batch_xrl_reward(shap_values, entropy_floor: float = 1e-3) -> tuple[float, float]:
    """(xrl_reward, max entropy) for a ``(batch, features)`` attribution array."""
    h = shannon_entropy(attribution_softmax(shap_values))
    h = np.atleast_1d(h)
    return xrl_reward(h, entropy_floor), float(h.max())
