import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sqf2k.heuristics import compute_constants
from sqf2k.primes import generate_primes


@pytest.fixture(scope="session")
def default_constants():
    # full-precision run, ~5 s; shared by every comparison test
    return compute_constants()


@pytest.fixture(scope="session")
def small_constants():
    # same pipeline at a small prime limit, for tests that only need shape
    return compute_constants(m=10**4)


@pytest.fixture(scope="session")
def primes_1m():
    return generate_primes(1 << 20)
