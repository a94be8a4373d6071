import numpy as np
import pytest

from irf_estim.irf import SensorModel

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sensor():
    return SensorModel(amplification=1.0, noise_var=1.0, sensor_std=0.0, L=64)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
