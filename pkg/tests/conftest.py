import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tbf.system import load_system_params

settings.register_profile("tbf", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("tbf")


@pytest.fixture(scope="session")
def params():
    return load_system_params()


def random_density(d, rng, rank=None):
    rank = rank or d
    x = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = x @ x.conj().T
    return m / np.trace(m)
