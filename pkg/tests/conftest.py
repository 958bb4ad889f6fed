import numpy as np
import pytest

from wavemon import Grid, GaussianPacketSpec, make_gaussian_packet


@pytest.fixture(scope="session")
def grid_1d():
    return Grid(((-300.0, 300.0),), (512,))


@pytest.fixture(scope="session")
def grid_2d():
    return Grid(((-150.0, 150.0), (-150.0, 150.0)), (128, 128))


@pytest.fixture()
def packet_1d(grid_1d):
    return make_gaussian_packet(grid_1d, GaussianPacketSpec((0.0,), 10.0))


def random_state(grid, seed):
    """Normalized state with rng-driven complex amplitudes (not smooth)."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    values /= np.sqrt((np.abs(values) ** 2).sum() * grid.cell_volume)
    from wavemon import WaveFunction
    return WaveFunction(grid, values)
