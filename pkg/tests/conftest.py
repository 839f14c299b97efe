import logging

import numpy as np
import pytest
from hypothesis import settings

from transcount.data import CountDataset, load_dataset

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_fit_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="transcount")


@pytest.fixture(scope="session")
def quine():
    return load_dataset("quine")


@pytest.fixture(scope="session")
def nmes():
    return load_dataset("nmes_males")


@pytest.fixture(scope="session")
def boating():
    return load_dataset("boating")


def random_dataset(rng, n=40, p=2, mean=3.0):
    X = rng.normal(size=(n, p))
    y = rng.poisson(mean * np.exp(0.3 * X[:, 0]) if p else mean, size=n)
    return CountDataset(y, X, tuple(f"x{j}" for j in range(p)))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
