import sys

import numpy as np
import pytest

from sdca.data import split_validation
from sdca.models import synth_spiked_gaussian


@pytest.fixture(scope="session")
def spiked_small():
    """n=10 spiked data, 4000 rows; shared read-only across tests."""
    return synth_spiked_gaussian(10, count=4000, seed=11)


@pytest.fixture(scope="session")
def spiked_split(spiked_small):
    return split_validation(spiked_small.dataset, 0.2, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
