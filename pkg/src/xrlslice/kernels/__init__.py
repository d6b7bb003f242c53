"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``XRLSLICE_BACKEND``
(``numba`` or ``numpy``).  Unset means numba when it imports, numpy
otherwise.  Both modules expose the same functions; ``get_backend`` returns
either one explicitly, which the tests and the benchmark use to compare them.
"""

import importlib
import os
import types

_NAMES = ("numba", "numpy")


def get_backend(name: str) -> types.ModuleType:
    if name not in _NAMES:
        raise ValueError(f"unknown kernel backend {name!r}; expected one of {_NAMES}")
    return importlib.import_module(f"{__name__}._{name}")


def _select() -> tuple[str, types.ModuleType]:
    requested = os.environ.get("XRLSLICE_BACKEND", "").strip().lower()
    if requested:
        return requested, get_backend(requested)
    try:
        return "numba", get_backend("numba")
    except ImportError:
        return "numpy", get_backend("numpy")


BACKEND, _impl = _select()

forward = _impl.forward
greedy_index = _impl.greedy_index
loss_grad = _impl.loss_grad
adam_update = _impl.adam_update
soft_update = _impl.soft_update
coalition_values = _impl.coalition_values

__all__ = [
    "BACKEND",
    "get_backend",
    "forward",
    "greedy_index",
    "loss_grad",
    "adam_update",
    "soft_update",
    "coalition_values",
]
