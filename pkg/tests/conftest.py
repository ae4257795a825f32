import pytest

from raptorwalk.codec import make_params
from raptorwalk.network import default_radius, generate_connected_rgg
from raptorwalk.rng import derive_seed


@pytest.fixture(scope="session")
def small_graph():
    """Connected 60-node RGG shared by protocol-level tests."""
    g, _ = generate_connected_rgg(60, 5.0, 1.3, derive_seed(101, 1))
    return g


@pytest.fixture(scope="session")
def small_params():
    return make_params(n=60, k=6, epsilon=0.5, c1=2.0, c2=10)


@pytest.fixture(scope="session")
def desk_graph():
    """n=200 graph at the default auto radius, for the statistics tests."""
    g, _ = generate_connected_rgg(200, 5.0, default_radius(200, 5.0),
                                  derive_seed(77, 1))
    return g
