"""Shared fixtures for the swiftprune test suite."""

import numpy as np
import pytest

from swiftprune import RowContext


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def random_ctx():
    """Factory for a well-posed random RowContext of a given size."""

    def make(n, seed=0, scale=1.0):
        r = np.random.default_rng(seed)
        x = r.normal(scale=scale, size=n)
        # keep every entry bounded away from zero so S is healthy and no
        # single column dominates the energy
        x[np.abs(x) < 1e-3] = 1e-3
        return RowContext.from_calibration(x)

    return make
