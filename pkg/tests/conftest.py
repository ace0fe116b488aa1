import pytest

from axon_backstepping.config import BioParams, ControlParams
from axon_backstepping.kernel import build_tables
from axon_backstepping.simulator import build_plant

L_S = 12e-6


@pytest.fixture(scope="session")
def bio():
    return BioParams()


@pytest.fixture(scope="session")
def plant(bio):
    return build_plant(bio, ControlParams(), L_S, 1e-6)


@pytest.fixture(scope="session")
def tables(plant):
    return build_tables(plant.aug, L_S, 201, plant.ctrl.gamma)
