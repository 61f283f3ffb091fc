import numpy as np
import pytest

from llstream.driftgen import StreamSpec, generate_stream
from llstream.runner import Hyperparams


@pytest.fixture(scope="session")
def small_stream():
    """Separable, stationary, cohort-free stream for fast runner tests."""
    return generate_stream(StreamSpec(n=1200, d=5, beta=0.4, seed=3))


@pytest.fixture(scope="session")
def small_hyper():
    return Hyperparams(
        group_size=100, init_window=4, valid_window=2, epochs=5,
        hidden=(16,), lr=0.01, seed=1,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(42)
