import numpy as np
import pytest

from foliate import builtin


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def flat_item():
    return builtin("flat_torus")


@pytest.fixture(scope="session")
def conformal_item():
    return builtin("conformal_torus")


@pytest.fixture(scope="session")
def twisted_item():
    return builtin("doubly_twisted_torus")


@pytest.fixture(scope="session")
def hopf_item():
    return builtin("hopf_s3")
