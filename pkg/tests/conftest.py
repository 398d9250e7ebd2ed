import numpy as np
import pytest

from chiralcal.pauli_core import BlochParams
from oracles import bloch_coefficients_batch, random_ginibre, random_pure_mixed


def valid_states(seed, n):
    """Random valid states: half noisy pure states, half Ginibre states."""
    gen = np.random.default_rng(seed)
    k = n // 2
    rhos = np.concatenate([random_pure_mixed(gen, k), random_ginibre(gen, n - k)])
    a, b, c = bloch_coefficients_batch(rhos)
    return [BlochParams(a[i], b[i], c[i]) for i in range(n)], rhos


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)
