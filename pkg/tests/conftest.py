import numpy as np
import pytest

from binsight.dataset import Dataset
from binsight.forest import get_kernel
from binsight.forest._backend import KERNELS

ACCEPTANCE_LINES = []

BACKENDS = sorted(KERNELS)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def separable_dataset(n=200, p=16, seed=0):
    """Two byte clusters split by feature 0 at 127.5, noise elsewhere."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = rng.integers(0, 256, size=(n, p))
    X[:, 0] = np.where(y == 0, rng.integers(20, 90, n), rng.integers(165, 235, n))
    return Dataset(X.astype(np.uint8), y, ("low", "high"))


@pytest.fixture
def separable():
    return separable_dataset()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_report_header(config):
    return f"binsight kernel: {get_kernel().__name__.rsplit('.', 1)[-1]} (available: {BACKENDS})"
