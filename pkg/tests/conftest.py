import math

import numpy as np
import pytest

from eplim.gaslaw import GasLaw
from eplim.grid import Grid
from eplim.profiles import ProfileInit, build_profiles

ISOTHERMAL = (GasLaw(), GasLaw())


def smooth_inits(grid, order1=0.5):
    kx = 2 * math.pi * grid.x / grid.length
    order0 = ProfileInit(1 + 0.2 * np.cos(kx), 0.1 + 0.2 * np.sin(kx),
                         1 + 0.2 * np.cos(kx), 0.3 * np.sin(kx))
    order1 = ProfileInit(order1 * np.sin(kx), order1 * np.cos(kx),
                         order1 * np.sin(2 * kx), order1 * np.cos(kx))
    return [order0, order1]


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


@pytest.fixture(scope="session")
def ze_profiles(grid64):
    return build_profiles("zero-electron", grid64, smooth_inits(grid64), ISOTHERMAL, 1.0, 0.1, 1)


@pytest.fixture(scope="session")
def ii_profiles(grid64):
    return build_profiles("infinity-ion", grid64, smooth_inits(grid64), ISOTHERMAL, 1.0, 0.1, 1)
