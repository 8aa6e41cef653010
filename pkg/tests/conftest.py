import sys

import numpy as np
import pytest

from vmifs import _backend
from vmifs.data import Dataset, discretize, gen_tree_synthetic


@pytest.fixture(scope="session")
def tree_5000():
    return gen_tree_synthetic(5000, 0)


@pytest.fixture(scope="session")
def tree_100k_binned():
    return discretize(gen_tree_synthetic(100000, 0), 20, "equal-frequency")


@pytest.fixture(params=_backend.available())
def backend(request):
    prev = _backend.use(request.param)
    yield request.param
    _backend.use(prev)


@pytest.fixture
def toy():
    X = np.array([[0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 0, 0]])
    y = np.array([0, 0, 1, 1, 0, 1])
    return Dataset.from_codes(X, y)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod._line(n))
