import warnings

import pytest

from curvedqm import make_grid, make_surface
from curvedqm.factors import SingularODE, solve_factors_revolution


@pytest.fixture(scope="session")
def torus():
    return make_surface("torus", {"a": 2.0, "b": 1.0})


@pytest.fixture(scope="session")
def sphere():
    return make_surface("sphere", {"a": 1.0})


@pytest.fixture(scope="session")
def torus128(torus):
    return make_grid(torus, 128)


@pytest.fixture(scope="session")
def torus64(torus):
    return make_grid(torus, 64)


@pytest.fixture(scope="session")
def sphere128(sphere):
    return make_grid(sphere, 128)


@pytest.fixture(scope="session")
def solved():
    """ODE-solved factors keyed by (surface name, n), computed once per session."""
    cache = {}

    def get(name, n):
        if (name, n) not in cache:
            chart = make_surface(name)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SingularODE)
                cache[name, n] = solve_factors_revolution(chart, make_grid(chart, n))
        return cache[name, n]

    return get
