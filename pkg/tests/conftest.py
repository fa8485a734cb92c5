import numpy as np
import pytest

from frozencore.config import DonorConfig


@pytest.fixture(scope="session")
def cfg():
    return DonorConfig()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240612)
