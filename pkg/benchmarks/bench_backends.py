"""Compare the numba and pure-numpy kernel backends on the hot paths of a training run.

    python benchmarks/bench_backends.py [--repeat 200]

The first numba call per kernel compiles (or loads from cache) and is excluded from timings.
"""
import argparse
import timeit

import numpy as np

from xrlslice import kernels
from xrlslice.nn import QNetwork, param_count

DIMS = (3, 24, 24, 11)


def cases(rng):
    theta = QNetwork.initialize(DIMS, rng).theta
    n = param_count(DIMS)
    return {
        "forward 1 state": lambda k: k.forward(theta, rng_state, DIMS),
        "greedy 32 states": lambda k: k.greedy_index(theta, batch, DIMS),
        "loss_grad batch 32": lambda k: k.loss_grad(theta, batch, actions, targets, DIMS),
        "adam_update": lambda k: k.adam_update(theta.copy(), grad, np.zeros(n), np.zeros(n), 1, 1e-3, .9, .999, 1e-8),
        "coalitions 32x16": lambda k: k.coalition_values(theta, batch, background, DIMS, 10),
    }


rng = np.random.default_rng(0)
rng_state = rng.random((1, 3))
batch = rng.random((32, 3))
background = rng.random((16, 3))
actions = rng.integers(0, 11, 32)
targets = rng.normal(size=32)
grad = rng.normal(size=param_count(DIMS))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    backends = {name: kernels.get_backend(name) for name in ("numpy", "numba")}
    print(f"{'kernel':<22}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for label, fn in cases(np.random.default_rng(1)).items():
        times = {}
        for name, k in backends.items():
            fn(k)  # warm up / compile
            times[name] = min(timeit.repeat(lambda: fn(k), number=args.repeat, repeat=5)) / args.repeat * 1e6
        print(f"{label:<22}{times['numpy']:>12.1f}{times['numba']:>12.1f}{times['numpy'] / times['numba']:>9.2f}x")


if __name__ == "__main__":
    main()
