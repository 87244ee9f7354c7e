import numpy as np
import pytest

from v2xqos.dataset import generate_synthetic


@pytest.fixture(scope="session")
def synth500():
    return generate_synthetic(500, 7)


@pytest.fixture(scope="session")
def synth120():
    return generate_synthetic(120, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
