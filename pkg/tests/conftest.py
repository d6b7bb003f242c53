import sys

import numpy as np
import pytest

from xrlslice import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    return kernels.get_backend(request.param)


def pytest_terminal_summary(terminalreporter):
    module = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
