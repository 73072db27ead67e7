import numpy as np
import pytest
import torch

from nrvb import backend


@pytest.fixture(autouse=True)
def reference_backend():
    """All tests run against the reference coder unless they opt in to the kernel."""
    backend.use_reference()
    yield
    backend.use_reference()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(autouse=True)
def fixed_torch_seed():
    torch.manual_seed(0)
