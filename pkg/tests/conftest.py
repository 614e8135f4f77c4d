import pytest

from geokit.models import SearchConfig
from geokit.sphere import build_grid
from geokit.store import get_connection


@pytest.fixture
def circle_grid():
    return build_grid(2, 256)


@pytest.fixture
def fine_circle_grid():
    return build_grid(2, 1024)


@pytest.fixture
def coarse_circle_grid():
    """Cheap planar grid for estimator tests."""
    return build_grid(2, 128)


@pytest.fixture
def sphere_grid():
    return build_grid(3, 24)


@pytest.fixture
def small_search():
    return SearchConfig(starts=3, max_iters=200, seed=7)


# Use in-memory DuckDB for tests
@pytest.fixture
def db():
    conn = get_connection(":memory:")
    yield conn
    conn.close()
