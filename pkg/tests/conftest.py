import numpy as np
import pytest

from cascade_dendrite.cascade import CascadeHandle
from cascade_dendrite.laws import Deterministic, SqrtDirichlet, UniformIID


@pytest.fixture
def uniform_law():
    return UniformIID()


@pytest.fixture
def det_law():
    return Deterministic(0.5, 0.5, 0.5)


@pytest.fixture
def dirichlet_law():
    return SqrtDirichlet()


@pytest.fixture
def handle(uniform_law):
    return CascadeHandle(0, uniform_law)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
