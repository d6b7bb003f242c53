"""Exact interventional Shapley values for the greedy PRB decision.

With three state features there are only eight coalitions, so every value is
computed by full enumeration: for each coalition the explained state's
features overwrite the corresponding columns of every background row, the
greedy PRB allocation is evaluated, and the results are averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from xrlslice import kernels
from xrlslice.nn import QNetwork

FEATURES = ("snr", "served_traffic", "remaining_capacity")


@dataclass(frozen=True)
class Attribution:
    shap_values: np.ndarray
    base_value: float
    fx: float


class BackgroundSet:
    """Reference states used to marginalize absent features."""

    def __init__(self, vectors):
        vectors = np.array(vectors, dtype=np.float64, ndmin=2)
        if vectors.shape[0] == 0:
            raise ValueError("background set is empty")
        self.vectors = vectors

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_buffer(cls, states: np.ndarray, size: int, rng: np.random.Generator) -> "BackgroundSet":
        n = states.shape[0]
        if n == 0:
            raise ValueError("cannot draw a background from an empty buffer")
        idx = rng.choice(n, size=min(size, n), replace=False)
        return cls(states[np.sort(idx)])


def _coalition_weights(n_feat: int):
    """Index pairs (with, without) and weights for every (feature, coalition without it)."""
    with_idx, without_idx, weights = [], [], []
    for l in range(n_feat):
        row_w, row_wo, row_k = [], [], []
        for s in range(1 << n_feat):
            if s >> l & 1:
                continue
            size = bin(s).count("1")
            row_wo.append(s)
            row_w.append(s | 1 << l)
            row_k.append(math.factorial(size) * math.factorial(n_feat - size - 1)
                         / math.factorial(n_feat))
        with_idx.append(row_w)
        without_idx.append(row_wo)
        weights.append(row_k)
    return np.array(with_idx), np.array(without_idx), np.array(weights)


def shapley_from_coalitions(values: np.ndarray) -> np.ndarray:
    """Shapley values from coalition values of shape ``(n, 2**L)`` (bit l = feature l present)."""
    values = np.atleast_2d(values)
    n_feat = int(values.shape[1]).bit_length() - 1
    w_idx, wo_idx, weights = _coalition_weights(n_feat)
    return np.sum(weights * (values[:, w_idx] - values[:, wo_idx]), axis=2)


def model_output(net: QNetwork, x, chunk_prb: int) -> np.ndarray | float:
    """Greedy PRB allocation chunk * argmax_a Q(x, a)."""
    out = chunk_prb * net.greedy(x)
    return float(out) if np.ndim(out) == 0 else out.astype(np.float64)


def _check_background(background) -> np.ndarray:
    bg = background.vectors if isinstance(background, BackgroundSet) else np.asarray(background, dtype=np.float64)
    if bg.ndim != 2 or bg.shape[0] == 0:
        raise ValueError("background set is empty")
    return bg


def explain_arrays(net: QNetwork, states, background, chunk_prb: int):
    """Vectorized core: returns ``(shap (n, L), base (n,), fx (n,))``."""
    bg = _check_background(background)
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    values = kernels.coalition_values(net.theta, states, bg, net.dims, chunk_prb)
    return shapley_from_coalitions(values), values[:, 0], values[:, -1]


def exact_shapley(net: QNetwork, state, background, chunk_prb: int) -> Attribution:
    shap, base, fx = explain_arrays(net, state, background, chunk_prb)
    return Attribution(shap[0], float(base[0]), float(fx[0]))


def explain_batch(net: QNetwork, states, background, chunk_prb: int) -> list[Attribution]:
    shap, base, fx = explain_arrays(net, states, background, chunk_prb)
    return [Attribution(s, float(b), float(f)) for s, b, f in zip(shap, base, fx)]


def exact_shapley_model(model: Callable[[np.ndarray], np.ndarray], state, background) -> Attribution:
    """Same enumeration for an arbitrary vectorized model ``f(rows) -> outputs``."""
    bg = _check_background(background)
    x = np.asarray(state, dtype=np.float64)
    n_feat = x.shape[0]
    values = np.empty((1, 1 << n_feat))
    for s in range(1 << n_feat):
        mask = (s >> np.arange(n_feat)) & 1 == 1
        rows = np.where(mask, x, bg)
        values[0, s] = float(np.mean(model(rows)))
    shap = shapley_from_coalitions(values)[0]
    return Attribution(shap, float(values[0, 0]), float(values[0, -1]))
