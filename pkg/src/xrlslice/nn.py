"""Fixed-architecture Q-network: ``n_in -> h1 -> h2 -> n_actions`` with ReLU hidden layers.

Parameters are a single flat float64 vector so that Adam, soft updates and
checkpointing are plain vector operations.  The kernels doing the actual
work live in :mod:`xrlslice.kernels`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from xrlslice import kernels

_MAGIC = b"XRLQNET\x00"
_VERSION = 1
_HEADER = struct.Struct("<8sIIIIIIQQ")


class DivergenceError(FloatingPointError):
    """Loss or gradient became non-finite during training."""


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = None


def param_count(dims) -> int:
    n_in, h1, h2, n_out = dims
    return n_in * h1 + h1 + h1 * h2 + h2 + h2 * n_out + n_out


class QNetwork:
    """Online or target Q-function with its own Adam state."""

    def __init__(self, dims, theta=None):
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) != 4 or min(self.dims) <= 0:
            raise ValueError(f"dims must be four positive ints (n_in, h1, h2, n_out), got {dims}")
        n = param_count(self.dims)
        if theta is None:
            theta = np.zeros(n)
        theta = np.array(theta, dtype=np.float64)
        if theta.shape != (n,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({n},)")
        self.theta = theta
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.step = 0

    @classmethod
    def initialize(cls, dims, rng: np.random.Generator) -> "QNetwork":
        """He-uniform weights (bound sqrt(6 / fan_in)), zero biases."""
        net = cls(dims)
        for fan_in, w, _ in net._layer_views():
            w[...] = rng.uniform(-1.0, 1.0, size=w.shape) * np.sqrt(6.0 / fan_in)
        return net

    def _layer_views(self):
        views = kernels.get_backend("numpy").unpack(self.theta, self.dims)
        fan_ins = (self.dims[0], self.dims[1], self.dims[2])
        return [(fan_ins[k], views[2 * k], views[2 * k + 1]) for k in range(3)]

    @property
    def num_actions(self) -> int:
        return self.dims[3]

    def layers(self):
        """(W1, b1, W2, b2, W3, b3) as views into ``theta``."""
        return kernels.get_backend("numpy").unpack(self.theta, self.dims)

    def copy(self) -> "QNetwork":
        other = QNetwork(self.dims, self.theta.copy())
        other.m = self.m.copy()
        other.v = self.v.copy()
        other.step = self.step
        return other

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x[None, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.dims[0]:
            raise ValueError(f"expected input width {self.dims[0]}, got shape {x.shape}")
        return batch, single

    def forward(self, x) -> np.ndarray:
        batch, single = self._as_batch(x)
        q = kernels.forward(self.theta, batch, self.dims)
        return q[0] if single else q

    __call__ = forward

    def greedy(self, x) -> np.ndarray:
        """Index of the largest Q-value per row; ties go to the lowest index."""
        batch, single = self._as_batch(x)
        idx = kernels.greedy_index(self.theta, batch, self.dims)
        return idx[0] if single else idx

    def loss_and_grad(self, states, actions, targets):
        batch, _ = self._as_batch(states)
        return kernels.loss_grad(self.theta, batch, np.asarray(actions), np.asarray(targets), self.dims)

    def train_step(self, states, actions, targets, adam: AdamConfig = AdamConfig()) -> float:
        """One Adam step on mean((y - Q(s, a))**2).  Returns the pre-update loss."""
        targets = np.asarray(targets, dtype=np.float64)
        if targets.size == 0:
            raise ValueError("empty training batch")
        if not np.all(np.isfinite(targets)):
            raise DivergenceError("non-finite TD target")
        loss, grad = self.loss_and_grad(states, actions, targets)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise DivergenceError(f"non-finite loss or gradient (loss={loss})")
        if adam.grad_clip is not None:
            norm = float(np.linalg.norm(grad))
            if norm > adam.grad_clip:
                grad *= adam.grad_clip / norm
        self.step += 1
        kernels.adam_update(self.theta, grad, self.m, self.v, self.step,
                            adam.learning_rate, adam.beta1, adam.beta2, adam.eps)
        return loss


def soft_update(target: QNetwork, online: QNetwork, tau: float) -> QNetwork:
    """target <- tau * online + (1 - tau) * target, in place."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    if target.dims != online.dims:
        raise ValueError(f"shape mismatch: {target.dims} vs {online.dims}")
    kernels.soft_update(target.theta, online.theta, tau)
    return target


def save(net: QNetwork, path) -> None:
    """Write parameters and Adam state as little-endian float64 behind a fixed header."""
    header = _HEADER.pack(_MAGIC, _VERSION, 4, *net.dims, net.step, net.theta.size)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (net.theta, net.m, net.v):
            fh.write(arr.astype("<f8").tobytes())


def load(path) -> QNetwork:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, ndims, *rest = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a Q-network checkpoint")
    if version != _VERSION or ndims != 4:
        raise ValueError(f"{path}: unsupported checkpoint version {version} / ndims {ndims}")
    dims, step, n = tuple(rest[:4]), rest[4], rest[5]
    if n != param_count(dims):
        raise ValueError(f"{path}: parameter count {n} does not match dims {dims}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 3 * n:
        raise ValueError(f"{path}: expected {3 * n} values, found {body.size}")
    net = QNetwork(dims, body[:n])
    net.m = body[n:2 * n].astype(np.float64)
    net.v = body[2 * n:].astype(np.float64)
    net.step = int(step)
    return net
