import numpy as np
import pytest

from qlyap.models import make_model


@pytest.fixture
def brownian():
    return make_model("brownian")


@pytest.fixture
def pitchfork():
    return make_model("pitchfork", alpha=1.0, c=1.0)


@pytest.fixture
def ou():
    return make_model("ou", kappa=1.0, c=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
