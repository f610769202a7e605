import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from matweight import WeightMode, WeightPolicy, assign_weights, gen_regular_ring

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ODD = (0, 2, 4, 6, 8)


@pytest.fixture(scope="session")
def ring():
    return gen_regular_ring(10, 4, 3)


@pytest.fixture(scope="session")
def pd_ring(ring):
    return assign_weights(ring, WeightPolicy(seed=11))


@pytest.fixture(scope="session")
def balanced_ring(ring):
    return assign_weights(ring, WeightPolicy.balanced(ODD, 10, seed=11))


@pytest.fixture(scope="session")
def nd_ring(ring):
    return assign_weights(ring, WeightPolicy(WeightMode.ALL_NEGATIVE_DEFINITE, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
