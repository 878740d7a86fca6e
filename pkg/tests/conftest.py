import numpy as np
import pytest

from hypam import field as fd
from hypam.varopt import ModelParams


@pytest.fixture(scope="session")
def params2():
    return ModelParams(2, 1.0)


@pytest.fixture(scope="session")
def spec_unit():
    """sigma2 = 1, R0 = 1 covariance profile shared across tests."""
    return fd.make_spec(1.0, 1.0, "poly3", d=2)


@pytest.fixture(scope="session")
def spec_quarter():
    """sigma2 = 0.25, R0 = 1 (used by the Feynman-Kac cross-checks)."""
    return fd.make_spec(0.25, 1.0, "poly3", d=2)


def rng_of(seed):
    return np.random.default_rng(seed)
