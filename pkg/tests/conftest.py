"""Shared fixtures: reference hierarchies and small deterministic datasets."""

import numpy as np
import pytest

from lht.data import generate_synthetic
from lht.hierarchy import LabelHierarchy, balanced


@pytest.fixture(scope="session")
def h842() -> LabelHierarchy:
    """The balanced 8 -> 4 -> 2 taxonomy used throughout the suite."""
    return balanced((8, 4, 2))


@pytest.fixture(scope="session")
def h42() -> LabelHierarchy:
    """A two-level 4 -> 2 taxonomy for hand-checkable cases."""
    return balanced((4, 2))


@pytest.fixture(scope="session")
def tiny_data(h842):
    """A small, quickly generated train/test pair on the 8-4-2 hierarchy."""
    return generate_synthetic(h842, d=8, n_per_class=12, noise_sigma=1.0,
                              center_scales=(1.0, 2.0, 4.0), seed=7)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(1234))
