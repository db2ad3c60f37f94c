"""
Shared pytest configuration
"""

import pytest

import graphs


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: desk-scale reproductions (run with pytest -m slow)"
    )


@pytest.fixture
def square_torus():
    """torus([4,4]): 16 vertices, 32 edges"""
    return graphs.torus([4, 4])


@pytest.fixture
def single_edge():
    """K_2 as a one-edge graph"""
    return graphs.complete(2)
