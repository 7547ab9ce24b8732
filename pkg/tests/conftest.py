import numpy as np
import pytest

from core.config import GridSpec
from tools.datasets import sample, SUITE
from tools.potential import model_potential, zero_potential
from tools.spectral import build_spectral_table


@pytest.fixture(scope="session")
def free_pot():
    return zero_potential()


@pytest.fixture(scope="session")
def model_pot():
    return model_potential(1.0)


@pytest.fixture(scope="session")
def free_table(free_pot):
    grid = GridSpec(x_max=30.0, dx=0.05, xi_min=1e-5, xi_max=6.0, per_decade=24, t_max=10.0)
    return build_spectral_table(free_pot, grid)


@pytest.fixture(scope="session")
def model_table(model_pot):
    grid = GridSpec(x_max=40.0, dx=0.05, xi_min=1e-3, xi_max=6.0, per_decade=24, t_max=16.0)
    return build_spectral_table(model_pot, grid)


@pytest.fixture
def gaussian_free(free_table):
    return sample(SUITE["gaussian"], free_table)


@pytest.fixture
def gaussian_model(model_table):
    return sample(SUITE["gaussian"], model_table)


def gaussian(x):
    return np.exp(-0.5 * np.asarray(x) ** 2)
