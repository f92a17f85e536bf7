import functools
import math

import numpy as np
import pytest

from trapnls.hermite import BasisSpec, build_basis
from trapnls.resonant import build_interaction_tensor
from trapnls.xgrid import XGrid

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def basis(d, n_max, q=None):
    return build_basis(BasisSpec(d, n_max, 2 * n_max + 1 if q is None else q))


@functools.lru_cache(maxsize=None)
def tensor(d, n_max):
    return build_interaction_tensor(basis(d, n_max))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid():
    return XGrid(16 * math.pi, 128)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
