import numpy as np
import pytest

from modlab.numerics import RngStream


@pytest.fixture
def stream():
    return RngStream(20240611)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
