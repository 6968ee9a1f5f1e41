"""
Shared pytest fixtures: seeded random generators, standard plants, graphs
and scenario paths.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

SCRIPT_DIR = Path(__file__).resolve().parent
if str(SCRIPT_DIR) not in sys.path:
    sys.path.insert(0, str(SCRIPT_DIR))

REPO_ROOT = SCRIPT_DIR.parent.parent
SCENARIO_DIR = REPO_ROOT / 'scenarios'


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture
def ring6():
    from graph import directed_ring
    return directed_ring(6)


@pytest.fixture
def double_integrator_plant():
    from protocol import double_integrator
    return double_integrator(1)
