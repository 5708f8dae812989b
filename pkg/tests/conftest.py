import numpy as np
import pytest

from mpdns.spectral import make_grid


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale acceptance runs")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def grid8():
    return make_grid(8)


@pytest.fixture
def grid16():
    return make_grid(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
