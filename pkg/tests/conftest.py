import numpy as np
import pytest
from hypothesis import settings

from parakernel.fields import FourierField, PolyField

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def ou_drift():
    """b(x) = -x in one dimension."""
    return [PolyField(1, {(1,): -1.0})]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def constant_drift(mu):
    n = len(mu)
    return [FourierField.constant(m, n) for m in mu]


def ones(Y):
    return np.ones(len(Y))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
