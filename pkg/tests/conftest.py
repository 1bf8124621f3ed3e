import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rgl.basis import build_basis
from rgl.params import ModelParams, Truncation

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def basis2():
    return build_basis(ModelParams(Omega=0.3), Truncation(8))


@pytest.fixture(scope="session")
def basis3():
    return build_basis(ModelParams(Omega=0.3, dim=3), Truncation(4))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
