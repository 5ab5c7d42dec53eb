import numpy as np
import pytest

from tlsgates.config import SystemConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def pair_cfg():
    return SystemConfig(tls=[dict(Delta=0.0, g=40.0), dict(Delta=-60.0, g=30.0)],
                        Delta_c=300.0, epsilon=0.0)


@pytest.fixture
def single_cfg():
    return SystemConfig(tls=[dict(Delta=40.0, g=40.0)], Delta_c=120.0, epsilon=0.0)


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_unitary(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(A)
    return q * (np.diag(r) / np.abs(np.diag(r)))
