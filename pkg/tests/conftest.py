import sys

import numpy as np
import pytest

from spinlyap.spin_core import ModelParams

LMG = ModelParams(h=1.0, J=1.0, K=0.0, N=500)
QUARTIC = ModelParams(h=3.265, J=1.0, K=1.5, N=500)


@pytest.fixture
def lmg():
    return LMG


@pytest.fixture
def quartic():
    return QUARTIC


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    # repeat the one-line acceptance verdicts after the run
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
