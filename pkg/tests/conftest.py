import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bhtrimer.fock import ModelParams
from bhtrimer.spectral import compute_spectrum

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def small_spectrum():
    return compute_spectrum(ModelParams(12, 3.0, 0.1))


@pytest.fixture(scope="session")
def free_spectrum():
    return compute_spectrum(ModelParams(8, 0.0, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
