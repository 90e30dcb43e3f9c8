"""Shared fixtures.  Expensive nets are session-scoped so the suite builds
each of them once."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ultraregular import suite  # noqa: E402
from ultraregular.weights import make_gevrey  # noqa: E402


@pytest.fixture(scope="session")
def W2():
    return make_gevrey(2.0, 512)


@pytest.fixture(scope="session")
def grid1():
    return suite.grid_1d()


@pytest.fixture(scope="session")
def ladder():
    return suite.ladder()


@pytest.fixture(scope="session")
def delta1(grid1, ladder):
    return suite.delta_net(grid1, ladder)


@pytest.fixture(scope="session")
def canned():
    return suite.canned_suite_1d()


@pytest.fixture(scope="session")
def sheet():
    return suite.delta_sheet_2d(0)


@pytest.fixture(scope="session")
def cfg2d():
    return suite.config_2d()
