import numpy as np
import pytest
import torch


@pytest.fixture(scope="session", autouse=True)
def _pin_threads():
    torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
