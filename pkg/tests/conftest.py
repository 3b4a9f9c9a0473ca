import numpy as np
import pytest

from decotab.graphs import LabeledGraph, perfect_order
from decotab.modelio import load_fixture
from decotab.tables import LevelSpec


@pytest.fixture(scope="session")
def chain3():
    return load_fixture("chain3")


@pytest.fixture(scope="session")
def thick6():
    return load_fixture("thick6")


@pytest.fixture(scope="session")
def branch11():
    return load_fixture("branch11")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
