"""Numba-compiled kernels.

Same contracts and parameter layout as the numpy reference in ``_numpy``.
The network is tiny (3 -> 24 -> 24 -> 11), so small batches go through
hand-written row loops where BLAS dispatch would dominate; the Shapley
coalition sweep (thousands of rows) goes through ``np.dot``.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def _offsets(dims):
    n_in, h1, h2, n_out = dims[0], dims[1], dims[2], dims[3]
    o_w1 = 0
    o_b1 = o_w1 + n_in * h1
    o_w2 = o_b1 + h1
    o_b2 = o_w2 + h1 * h2
    o_w3 = o_b2 + h2
    o_b3 = o_w3 + h2 * n_out
    return o_w1, o_b1, o_w2, o_b2, o_w3, o_b3


@njit(**_OPTS)
def _row_forward(theta, x, dims, z1, a1, z2, a2, q):
    # axpy ordering keeps the inner loop contiguous in the row-major weights
    n_in, h1, h2, n_out = dims[0], dims[1], dims[2], dims[3]
    o_w1, o_b1, o_w2, o_b2, o_w3, o_b3 = _offsets(dims)
    for j in range(h1):
        z1[j] = theta[o_b1 + j]
    for i in range(n_in):
        xi = x[i]
        base = o_w1 + i * h1
        for j in range(h1):
            z1[j] += xi * theta[base + j]
    for j in range(h1):
        a1[j] = z1[j] if z1[j] > 0.0 else 0.0
    for j in range(h2):
        z2[j] = theta[o_b2 + j]
    for i in range(h1):
        ai = a1[i]
        if ai == 0.0:
            continue
        base = o_w2 + i * h2
        for j in range(h2):
            z2[j] += ai * theta[base + j]
    for j in range(h2):
        a2[j] = z2[j] if z2[j] > 0.0 else 0.0
    for j in range(n_out):
        q[j] = theta[o_b3 + j]
    for i in range(h2):
        ai = a2[i]
        if ai == 0.0:
            continue
        base = o_w3 + i * n_out
        for j in range(n_out):
            q[j] += ai * theta[base + j]


@njit(**_OPTS)
def _argmax_first(q):
    best = 0
    for j in range(1, q.shape[0]):
        if q[j] > q[best]:
            best = j
    return best


@njit(**_OPTS)
def _forward(theta, x, dims):
    n = x.shape[0]
    z1 = np.empty(dims[1])
    a1 = np.empty(dims[1])
    z2 = np.empty(dims[2])
    a2 = np.empty(dims[2])
    out = np.empty((n, dims[3]))
    for r in range(n):
        _row_forward(theta, x[r], dims, z1, a1, z2, a2, out[r])
    return out


@njit(**_OPTS)
def _greedy_index(theta, x, dims):
    n = x.shape[0]
    z1 = np.empty(dims[1])
    a1 = np.empty(dims[1])
    z2 = np.empty(dims[2])
    a2 = np.empty(dims[2])
    q = np.empty(dims[3])
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        _row_forward(theta, x[r], dims, z1, a1, z2, a2, q)
        out[r] = _argmax_first(q)
    return out


@njit(**_OPTS)
def _loss_grad(theta, x, actions, targets, dims):
    n_in, h1, h2, n_out = dims[0], dims[1], dims[2], dims[3]
    o_w1, o_b1, o_w2, o_b2, o_w3, o_b3 = _offsets(dims)
    n = x.shape[0]
    grad = np.zeros(theta.shape[0])
    z1 = np.empty(h1)
    a1 = np.empty(h1)
    z2 = np.empty(h2)
    a2 = np.empty(h2)
    q = np.empty(n_out)
    dz1 = np.empty(h1)
    dz2 = np.empty(h2)
    loss = 0.0
    for r in range(n):
        _row_forward(theta, x[r], dims, z1, a1, z2, a2, q)
        a = actions[r]
        diff = q[a] - targets[r]
        loss += diff * diff
        g = 2.0 * diff / n
        # output layer: only column ``a`` receives gradient
        grad[o_b3 + a] += g
        for i in range(h2):
            grad[o_w3 + i * n_out + a] += a2[i] * g
            dz2[i] = theta[o_w3 + i * n_out + a] * g if z2[i] > 0.0 else 0.0
        for j in range(h2):
            grad[o_b2 + j] += dz2[j]
        for i in range(h1):
            s = 0.0
            ai = a1[i]
            for j in range(h2):
                grad[o_w2 + i * h2 + j] += ai * dz2[j]
                s += theta[o_w2 + i * h2 + j] * dz2[j]
            dz1[i] = s if z1[i] > 0.0 else 0.0
        for j in range(h1):
            grad[o_b1 + j] += dz1[j]
        for i in range(n_in):
            xi = x[r, i]
            for j in range(h1):
                grad[o_w1 + i * h1 + j] += xi * dz1[j]
    return loss / n, grad


@njit(**_OPTS)
def _adam_update(theta, grad, m, v, step, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for k in range(theta.shape[0]):
        g = grad[k]
        m[k] = beta1 * m[k] + (1.0 - beta1) * g
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g
        theta[k] -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)


@njit(**_OPTS)
def _soft_update(target, online, tau):
    keep = 1.0 - tau
    for k in range(target.shape[0]):
        target[k] = keep * target[k] + tau * online[k]


@njit(**_OPTS)
def _greedy_matrix(theta, x, dims, chunk, out):
    # batched path: BLAS matmuls with bias/ReLU/argmax fused in loops
    n_in, h1, h2, n_out = dims[0], dims[1], dims[2], dims[3]
    o_w1, o_b1, o_w2, o_b2, o_w3, o_b3 = _offsets(dims)
    w1 = theta[o_w1:o_b1].reshape((n_in, h1))
    w2 = theta[o_w2:o_b2].reshape((h1, h2))
    w3 = theta[o_w3:o_b3].reshape((h2, n_out))
    n = x.shape[0]
    a = np.dot(x, w1)
    for r in range(n):
        for j in range(h1):
            s = a[r, j] + theta[o_b1 + j]
            a[r, j] = s if s > 0.0 else 0.0
    b = np.dot(a, w2)
    for r in range(n):
        for j in range(h2):
            s = b[r, j] + theta[o_b2 + j]
            b[r, j] = s if s > 0.0 else 0.0
    q = np.dot(b, w3)
    for r in range(n):
        best = 0
        best_q = q[r, 0] + theta[o_b3]
        for j in range(1, n_out):
            v = q[r, j] + theta[o_b3 + j]
            if v > best_q:
                best_q = v
                best = j
        out[r] = chunk * best


@njit(**_OPTS)
def _coalition_values(theta, states, background, dims, chunk):
    n_states, n_feat = states.shape
    n_bg = background.shape[0]
    n_coal = 1 << n_feat
    composite = np.empty((n_states * n_coal * n_bg, n_feat))
    r = 0
    for s in range(n_states):
        for c in range(n_coal):
            for b in range(n_bg):
                for l in range(n_feat):
                    composite[r, l] = states[s, l] if (c >> l) & 1 else background[b, l]
                r += 1
    f = np.empty(composite.shape[0])
    _greedy_matrix(theta, composite, dims, chunk, f)
    out = np.empty((n_states, n_coal))
    r = 0
    for s in range(n_states):
        for c in range(n_coal):
            acc = 0.0
            for b in range(n_bg):
                acc += f[r]
                r += 1
            out[s, c] = acc / n_bg
    return out


def _dims(dims):
    return np.asarray(dims, dtype=np.int64)


def forward(theta, x, dims):
    return _forward(theta, np.ascontiguousarray(x, dtype=np.float64), _dims(dims))


def greedy_index(theta, x, dims):
    return _greedy_index(theta, np.ascontiguousarray(x, dtype=np.float64), _dims(dims))


def loss_grad(theta, x, actions, targets, dims):
    loss, grad = _loss_grad(
        theta,
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(actions, dtype=np.int64),
        np.ascontiguousarray(targets, dtype=np.float64),
        _dims(dims),
    )
    return float(loss), grad


def adam_update(theta, grad, m, v, step, lr, beta1, beta2, eps):
    _adam_update(theta, grad, m, v, float(step), lr, beta1, beta2, eps)


def soft_update(target, online, tau):
    _soft_update(target, online, float(tau))


def coalition_values(theta, states, background, dims, chunk):
    return _coalition_values(
        theta,
        np.ascontiguousarray(states, dtype=np.float64),
        np.ascontiguousarray(background, dtype=np.float64),
        _dims(dims),
        float(chunk),
    )
