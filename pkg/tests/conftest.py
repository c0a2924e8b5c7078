import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rqhd_lab import Params, SpectralGrid

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def grid1():
    return SpectralGrid.uniform(1, 64)


@pytest.fixture
def grid2():
    return SpectralGrid.uniform(2, 32)


@pytest.fixture
def params():
    return Params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_field(grid, rng, modes=4, complex_=False):
    """Random band-limited field with decaying spectrum."""
    F = np.zeros(grid.shape, dtype=complex)
    kk = np.sqrt(sum(m**2 for m in grid.mode_index))
    low = np.ones(grid.shape, dtype=bool)
    for m in grid.mode_index:
        low &= np.abs(m) <= modes
    F[low] = (rng.normal(size=low.sum()) + 1j * rng.normal(size=low.sum())) / (1 + kk[low]) ** 2
    f = np.fft.ifftn(F) * grid.size
    return f if complex_ else f.real
