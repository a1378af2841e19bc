import numpy as np
import pytest

from ghostcorr.config import RunConfig


@pytest.fixture(scope="session")
def default_system():
    return RunConfig().system()


@pytest.fixture(scope="session")
def system3():
    return RunConfig().system(N=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
