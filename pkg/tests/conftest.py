import numpy as np
import pytest

from hmmgaps.model import GaussianEmissions, HmmModel


def chain_model(n_states: int = 3, sigma: float = 0.1, stay: float = 0.2):
    """Small ring-ish chain with well separated Gaussian emissions."""
    trans = np.full((n_states, n_states), (1.0 - stay) / (n_states - 1))
    np.fill_diagonal(trans, stay)
    means = np.arange(n_states, dtype=np.float64)
    return HmmModel(trans=trans, emission=GaussianEmissions(means, sigma))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
