import numpy as np
import pytest

from coreset_kit.rng import SeededRng


@pytest.fixture
def rng():
    return SeededRng(20240817)


def gaussian(seed, n, d, scale=1.0):
    return scale * np.random.default_rng(seed).normal(size=(n, d))


def planted_low_rank(seed, n, d, k, noise=0.1, sparse_frac=None):
    """U V plus dense (or sparse) noise; returns (A, noise matrix)."""
    g = np.random.default_rng(seed)
    u = g.normal(size=(n, k))
    v = g.normal(size=(k, d))
    e = noise * g.normal(size=(n, d))
    if sparse_frac is not None:
        mask = g.random((n, d)) < sparse_frac
        e = np.where(mask, e / max(noise, 1e-12), 0.0)
    return u @ v + e, e
