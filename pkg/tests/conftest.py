import functools

import pytest

from relpolicy.fixtures import load_domain, load_instance
from relpolicy.pipeline import solve_instance


@functools.lru_cache(maxsize=None)
def domain(name):
    return load_domain(name)


@functools.lru_cache(maxsize=None)
def instance(name, size):
    inst = load_instance(name, size, domain(name))
    inst.enumerate()
    return inst


@functools.lru_cache(maxsize=None)
def solved(name, size):
    return solve_instance(instance(name, size))


@pytest.fixture
def bw3():
    return instance("bw-all", 3)


@pytest.fixture
def lg2():
    return instance("lg-ex", 2)
