import numpy as np
import pytest

from supplyshock.calibration import calibrate, random_io_table
from supplyshock.network import SupplyNetwork
from supplyshock.shock import bundled_sector_table
from supplyshock.synthetic import synthetic_economy


@pytest.fixture(scope="session")
def table():
    return bundled_sector_table()


@pytest.fixture(scope="session")
def small_economy():
    """600 firms over 3 regions, calibrated."""
    return synthetic_economy(600, region_count=3, seed=11)


@pytest.fixture(scope="session")
def economy10k():
    """The 10-region, 10,000-firm connected fixture used by the acceptance suite."""
    return synthetic_economy(10_000, region_count=10, seed=0)


def chain_network(n=4, **kw):
    return SupplyNetwork(
        sector=[1] * n, region=[1] * n, sales=[1.0] * n,
        supplier=list(range(n - 1)), client=list(range(1, n)), **kw,
    )


@pytest.fixture
def two_sector_io():
    def make(net, seed=0):
        return random_io_table(sorted(set(net.sector.tolist())), seed=seed)
    return make
