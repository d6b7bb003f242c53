"""Pure-numpy reference kernels.

The Q-network parameters live in one flat float64 vector laid out as
``W1 (n_in, h1), b1, W2 (h1, h2), b2, W3 (h2, n_out), b3`` with every weight
matrix row-major.  ``dims`` is the 4-tuple ``(n_in, h1, h2, n_out)``.
"""

import numpy as np


def unpack(theta, dims):
    n_in, h1, h2, n_out = dims
    views = []
    off = 0
    for fan_in, fan_out in ((n_in, h1), (h1, h2), (h2, n_out)):
        views.append(theta[off:off + fan_in * fan_out].reshape(fan_in, fan_out))
        off += fan_in * fan_out
        views.append(theta[off:off + fan_out])
        off += fan_out
    return views


def forward(theta, x, dims):
    w1, b1, w2, b2, w3, b3 = unpack(theta, dims)
    h = np.maximum(x @ w1 + b1, 0.0)
    h = np.maximum(h @ w2 + b2, 0.0)
    return h @ w3 + b3


def greedy_index(theta, x, dims):
    # np.argmax returns the first maximum, which is the lowest-index tie rule.
    return np.argmax(forward(theta, x, dims), axis=1)


def loss_grad(theta, x, actions, targets, dims):
    """Mean squared TD error on the chosen action and its gradient w.r.t. theta."""
    w1, b1, w2, b2, w3, b3 = unpack(theta, dims)
    n = x.shape[0]
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    a2 = np.maximum(z2, 0.0)
    q = a2 @ w3 + b3

    rows = np.arange(n)
    diff = q[rows, actions] - targets
    loss = float(np.mean(diff * diff))

    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * diff / n
    dz2 = (dq @ w3.T) * (z2 > 0.0)
    dz1 = (dz2 @ w2.T) * (z1 > 0.0)
    grad = np.concatenate([
        (x.T @ dz1).ravel(), dz1.sum(axis=0),
        (a1.T @ dz2).ravel(), dz2.sum(axis=0),
        (a2.T @ dq).ravel(), dq.sum(axis=0),
    ])
    return loss, grad


def adam_update(theta, grad, m, v, step, lr, beta1, beta2, eps):
    """In-place Adam update; ``step`` is the 1-based count after this update."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    theta -= lr * m_hat / (np.sqrt(v_hat) + eps)


def soft_update(target, online, tau):
    target *= 1.0 - tau
    target += tau * online


def coalition_values(theta, states, background, dims, chunk):
    """Mean greedy PRB output for every (state, coalition) pair.

    Bit ``l`` of the coalition index set means feature ``l`` is taken from the
    explained state; the remaining features come from each background row.
    Returns an array of shape ``(n_states, 2**n_features)``.
    """
    n_states, n_feat = states.shape
    n_bg = background.shape[0]
    n_coal = 1 << n_feat
    masks = ((np.arange(n_coal)[:, None] >> np.arange(n_feat)[None, :]) & 1).astype(bool)
    composite = np.where(
        masks[None, :, None, :], states[:, None, None, :], background[None, None, :, :]
    )
    idx = greedy_index(theta, composite.reshape(-1, n_feat), dims)
    out = (chunk * idx).astype(np.float64).reshape(n_states, n_coal, n_bg)
    return out.mean(axis=2)
