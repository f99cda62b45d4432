import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hivdelay.params import ModelParams

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def uganda():
    return ModelParams.uganda(6)


@pytest.fixture
def rng():
    return np.random.default_rng(20061992)
