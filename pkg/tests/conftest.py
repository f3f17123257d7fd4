import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "similab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("similab")


@pytest.fixture
def xi_grid():
    return np.linspace(-20.0, 20.0, 4001)
