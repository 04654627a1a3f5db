import pytest

from hardyp.domain import Annulus, Interval, build_domain, l_shape, unit_square


@pytest.fixture(scope="session")
def square():
    return build_domain(unit_square())


@pytest.fixture(scope="session")
def lshape():
    return build_domain(l_shape())


@pytest.fixture(scope="session")
def annulus():
    return build_domain(Annulus(1.0, 2.0))


@pytest.fixture(scope="session")
def interval():
    return build_domain(Interval(1.0))
