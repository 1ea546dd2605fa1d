import numpy as np
import pytest
from scipy.stats import unitary_group


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unitary(dim: int, seed: int) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=seed)


def random_state(n_qubits: int, seed: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    amp = r.normal(size=2**n_qubits) + 1j * r.normal(size=2**n_qubits)
    return amp / np.linalg.norm(amp)
