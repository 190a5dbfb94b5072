"""
Shared fixtures for the cql-switch test suite.
"""

import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from dotenv import load_dotenv

from cql_switch import settings
from cql_switch.params import derive_params, preset
from cql_switch.pipeline import plan_switching

load_dotenv()


@pytest.fixture(scope="session")
def fig2():
    return derive_params(preset(settings.FIG2))


@pytest.fixture(scope="session")
def fig3():
    return derive_params(preset(settings.FIG3))


@pytest.fixture(scope="session")
def fig4():
    return derive_params(preset(settings.FIG4))


@pytest.fixture(scope="session")
def fig6():
    return derive_params(preset(settings.FIG6))


@pytest.fixture(scope="session")
def fig6_plan():
    """FIG6 at the reference lambda and expulsion current."""
    return plan_switching(preset(settings.FIG6, lam=0.002), beta_e=settings.REFERENCE_BETA_E)


@pytest.fixture(scope="session")
def fig7_plan():
    return plan_switching(preset(settings.FIG7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_states(rng):
    """Random unit vectors, shape (3, n)."""

    def draw(n):
        u = rng.normal(size=(3, n))
        return u / np.linalg.norm(u, axis=0)

    return draw
