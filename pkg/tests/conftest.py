import numpy as np
import pytest

import helpers


@pytest.fixture
def box_mesh():
    return helpers.box_room()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
