from pathlib import Path

import pytest

from attrfuse.catalog import load_catalog
from attrfuse.simulator import load_scenario

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def table1():
    return load_catalog(REPO_ROOT / "catalogs" / "table1.json")


@pytest.fixture(scope="session")
def exp1_scenario():
    return load_scenario(REPO_ROOT / "scenarios" / "exp1.json")


@pytest.fixture(scope="session")
def exp2_scenario():
    return load_scenario(REPO_ROOT / "scenarios" / "exp2.json")


@pytest.fixture(scope="session")
def exp3_scenario():
    return load_scenario(REPO_ROOT / "scenarios" / "exp3.json")
