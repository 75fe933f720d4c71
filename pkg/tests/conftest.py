import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from handwave import ChirpConfig, RoiGrid, default_geometry


@pytest.fixture(scope="session")
def chirp():
    return ChirpConfig()


@pytest.fixture(scope="session")
def geometry(chirp):
    return default_geometry(chirp)


@pytest.fixture(scope="session")
def grid():
    return RoiGrid()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
