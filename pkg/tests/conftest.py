import numpy as np
import pytest

from concircle import geometry as geo


@pytest.fixture(scope="session")
def flat():
    return geo.metric_flat()


@pytest.fixture(scope="session")
def sphere():
    return geo.metric_sphere(1.0)


@pytest.fixture(scope="session")
def hyperbolic():
    return geo.metric_hyperbolic()


@pytest.fixture(scope="session")
def polar():
    return geo.metric_polar_flat()


@pytest.fixture(scope="session")
def lorentz():
    return geo.metric_lorentz_flat()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
