import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hyperot import synthetic
from hyperot.fuchsian import embed_domain, side_pairing_generators
from hyperot.lorentz import polar_point

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_sites(rng, n, radius=1.5):
    return polar_point(np.sqrt(rng.uniform(0, 1, n)) * radius, rng.uniform(0, 2 * np.pi, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def octagon_mesh():
    return synthetic.regular_surface(2, 4)


@pytest.fixture(scope="session")
def irregular_mesh():
    return synthetic.irregular_surface(2, 4, spread=0.15, seed=0)


@pytest.fixture(scope="session")
def octagon_domain(octagon_mesh):
    return embed_domain(octagon_mesh).recentred()


@pytest.fixture(scope="session")
def irregular_domain(irregular_mesh):
    return embed_domain(irregular_mesh).recentred()


@pytest.fixture(scope="session")
def octagon_group(octagon_domain):
    return side_pairing_generators(octagon_domain)


@pytest.fixture(scope="session")
def irregular_group(irregular_domain):
    return side_pairing_generators(irregular_domain)
