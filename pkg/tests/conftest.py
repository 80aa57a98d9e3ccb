import numpy as np
import pytest

from fbmgirsanov.core import TimeGrid


@pytest.fixture
def grid256():
    return TimeGrid(256, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
