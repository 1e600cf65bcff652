import numpy as np
import pytest

from elliptop.elliptic import EllipticParams

TAU = 0.3 + 1.1j


@pytest.fixture(scope="session")
def params():
    return EllipticParams(TAU)


@pytest.fixture(scope="session")
def params_square():
    return EllipticParams(1j)


def box_points(rng, count, tau=TAU):
    """Generic points in the sampling box [0.05, 0.45] + tau*[0.05, 0.45]."""
    a = rng.uniform(0.05, 0.45, count)
    b = rng.uniform(0.05, 0.45, count)
    return a + b * tau


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
