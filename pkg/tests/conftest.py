import pytest

from hawkspec.core import ObservationWindow, RngStream
from hawkspec.hawkes import HawkesParams, simulate


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long Monte Carlo checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def no_hawkspec_env(monkeypatch):
    """Keep HAWKSPEC_* settings from the developer's shell or .env out of the tests.

    Tests can opt in by setting the variables themselves.
    """
    for name in ("HAWKSPEC_SEED", "HAWKSPEC_JOBS", "HAWKSPEC_OUT", "HAWKSPEC_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    yield


@pytest.fixture
def true_params():
    return HawkesParams(1.0, 0.5, 2.0)


@pytest.fixture
def pattern_100(true_params):
    return simulate(true_params, ObservationWindow(0.0, 100.0), rng=RngStream(11))


@pytest.fixture
def small_pattern(true_params):
    return simulate(true_params, ObservationWindow(0.0, 15.0), rng=RngStream(3))
