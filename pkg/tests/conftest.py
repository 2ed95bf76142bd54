import pytest

from driftstop import PriorSpec, build_quadrature


@pytest.fixture(scope="session")
def bernoulli_table():
    return build_quadrature(PriorSpec.bernoulli(1.0, 0.5))


@pytest.fixture(scope="session")
def gaussian_table():
    return build_quadrature(PriorSpec.gaussian(0.0, 1.0), n=64)


@pytest.fixture(scope="session")
def halfnormal_table():
    return build_quadrature(PriorSpec.half_normal(1.0), n=128)


@pytest.fixture(scope="session")
def mixture_table():
    return build_quadrature(PriorSpec.symmetric_gaussian_mixture(1.0, 1.0), n=128)


@pytest.fixture(scope="session")
def all_tables(bernoulli_table, gaussian_table, halfnormal_table, mixture_table):
    return {
        "bernoulli": bernoulli_table,
        "gaussian": gaussian_table,
        "half_normal": halfnormal_table,
        "mixture": mixture_table,
    }
