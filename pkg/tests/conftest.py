import pytest

from platooncoord import compute_constants, nominal_params


@pytest.fixture(scope="session")
def p():
    return nominal_params()


@pytest.fixture(scope="session")
def consts(p):
    return compute_constants(p)
