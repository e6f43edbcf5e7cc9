import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nestedsearch.dist import DiscretePMF, UniformInterval
from nestedsearch.tree import random_tree

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def unit():
    return UniformInterval(0.0, 1.0)


@pytest.fixture(scope="session")
def coin():
    return DiscretePMF.from_pairs([(0.0, 0.5), (1.0, 0.5)])


@pytest.fixture(scope="session")
def tree_suite():
    """The seeded random-tree suite shared by the oracle checks."""
    rng = np.random.default_rng(20240601)
    return [random_tree(rng) for _ in range(100)]
