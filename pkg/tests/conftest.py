"""
Pytest configuration and shared fixtures for coarsetk tests
"""

import logging
import sys
import tempfile
from pathlib import Path

import pytest

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from coarsetk.config import Settings
from coarsetk.metric_core import FiniteMetricSpace
from coarsetk.precode import example_dyadic, example_triadic, validate_precode
from tests.fixtures.test_helpers import InstanceGenerator, load_sample_data

SEED = 7
ENV_KEYS = ("COARSETK_BUDGET", "COARSETK_THREADS", "COARSETK_SEED", "COARSETK_LOG_LEVEL", "COARSETK_PROGRESS")


@pytest.fixture(scope="session")
def sample_data():
    """Provide the parsed sample_data.json"""
    return load_sample_data()


@pytest.fixture(scope="session")
def fixtures_dir():
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def temp_dir():
    """Provide temporary directory for test outputs"""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def clean_env(monkeypatch):
    """Remove every COARSETK_* variable so settings start from defaults

    Each key is registered with monkeypatch first so values loaded from a
    dotenv file during the test are removed again on teardown.
    """
    for key in ENV_KEYS:
        monkeypatch.setenv(key, "0")
        monkeypatch.delenv(key)
    return monkeypatch


@pytest.fixture
def generator():
    """Seeded instance generator; the seed is logged for reproduction"""
    logging.getLogger(__name__).info(f"InstanceGenerator seed={SEED}")
    return InstanceGenerator(SEED)


@pytest.fixture
def settings():
    return Settings(clique_budget=100_000, coloring_budget=20_000, threads=1, seed=SEED)


@pytest.fixture(scope="session")
def line16():
    return FiniteMetricSpace.lattice("line16", [(0, 15)], "l1")


@pytest.fixture(scope="session")
def plane5():
    """Z^2 box [-5, 5]^2 with the max norm"""
    return FiniteMetricSpace.lattice("plane5", [(-5, 5), (-5, 5)], "linf")


@pytest.fixture
def dyadic8():
    P = example_dyadic(8)
    validate_precode(P, 2).raise_for_failures()
    return P


@pytest.fixture
def triadic2():
    P = example_triadic(2)
    validate_precode(P, 2).raise_for_failures()
    return P


def pytest_collection_modifyitems(config, items):
    """Automatically mark tests based on their location"""
    for item in items:
        path = str(item.fspath)
        if "properties" in path:
            item.add_marker(pytest.mark.property)
        if "cli" in path:
            item.add_marker(pytest.mark.cli)
        if not any(item.iter_markers(name="integration")) and not any(item.iter_markers(name="slow")):
            item.add_marker(pytest.mark.unit)
