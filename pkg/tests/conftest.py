"""Shared fixtures for crncert tests."""
import pytest

from crncert import corpus
from crncert.common.config import Config
from crncert.netio import parse_network


def network_from(text, name=""):
    """Parse inline .crn text into a network."""
    return parse_network(text, name=name).network


@pytest.fixture
def crn():
    """Parser for inline .crn text."""
    return network_from


@pytest.fixture
def sp():
    """S <-> P."""
    return corpus.load("sp")


@pytest.fixture
def ptm_cycle():
    """Single PTM cycle."""
    return corpus.load("ptm_cycle")


@pytest.fixture
def linear_star():
    """Linear star with two leaves."""
    return corpus.load("linear_star_2")


@pytest.fixture
def rfm3():
    """Ribosome flow model with three sites."""
    return corpus.load("rfm_3")


@pytest.fixture
def bistable():
    """2A + B -> 3A, A -> B."""
    return corpus.load("bistable")


@pytest.fixture
def config():
    """Config with small budgets for fast tests."""
    config = Config()
    config.override(trials=4, p0_trials=20)
    config.set("dynamics", "horizon", 20.0)
    config.set("dynamics", "initial_conditions", 2)
    return config
