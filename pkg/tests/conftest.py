import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bogofock.modes import BogoliubovMap
from bogofock.quadratic import generate_bogoliubov

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def squeeze():
    def make(r, theta=0.0):
        return BogoliubovMap([[np.cosh(r)]], [[np.exp(1j * theta) * np.sinh(r)]])

    return make


@pytest.fixture
def random_map():
    return generate_bogoliubov


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
