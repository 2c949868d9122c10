from functools import lru_cache

import numpy as np
import pytest

from mhdlayer.grid import build_grid
from mhdlayer.profiles import build_profile
from mhdlayer.weight import build_weight


@lru_cache(maxsize=None)
def setup(eps, y_max=20.0, N=4000, family="exp-approach"):
    """Grid, profile and weight shared across tests (read-only)."""
    g = build_grid(eps, y_max, N)
    p = build_profile(family, None, g)
    return g, p, build_weight(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, filled by test_acceptance.py and printed after the run
ACCEPTANCE = {}


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
