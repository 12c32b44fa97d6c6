import numpy as np
import pytest

from dvsemigroup import validate_generator


@pytest.fixture
def two_state():
    """The workhorse 2-state chain with rates a=1, b=2."""
    return validate_generator([[-1.0, 1.0], [2.0, -2.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
