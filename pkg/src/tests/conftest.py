import numpy as np
import pytest
from scipy.stats import unitary_group

from hidden_lgi import cmatrix
from hidden_lgi.quantum import DensityMatrix, KrausChannel

# randomized property suites run this many instances
PROPERTY_INSTANCES = 1000


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def random_unitary():
    def make(rng, d=2):
        return cmatrix.as_matrix(unitary_group.rvs(d, random_state=rng))
    return make


@pytest.fixture
def random_matrix():
    def make(rng, rows=2, cols=2):
        return cmatrix.as_matrix(rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols)))
    return make


@pytest.fixture
def random_state(random_matrix):
    """Mixed states from the Ginibre ensemble."""
    def make(rng, d=2):
        g = random_matrix(rng, d, d)
        rho = g @ np.conj(g).T
        return DensityMatrix(rho / np.trace(rho).real)
    return make


@pytest.fixture
def random_channel(random_unitary):
    """Channels from the first d columns of a random (n d)-dimensional unitary."""
    def make(rng, d=2, n_ops=3):
        isometry = random_unitary(rng, d * n_ops)[:, :d]
        return KrausChannel(tuple(isometry[i * d:(i + 1) * d] for i in range(n_ops)))
    return make
