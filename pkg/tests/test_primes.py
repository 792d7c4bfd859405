import numpy as np
import pytest

from sqf2k.primes import generate_primes


def naive_is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def test_matches_naive_primality_to_3000():
    table = generate_primes(3000)
    got = set(table.primes.tolist())
    for n in range(2, 3001):
        assert (n in got) == naive_is_prime(n), n


def test_prime_counts():
    assert len(generate_primes(100)) == 25
    assert len(generate_primes(10**5)) == 9592


def test_prefix_stability():
    small = generate_primes(10**4)
    large = generate_primes(10**5)
    assert np.array_equal(large.primes[: len(small)], small.primes)


def test_edge_limits():
    assert len(generate_primes(1)) == 0
    assert generate_primes(2).primes.tolist() == [2]
    with pytest.raises(ValueError):
        generate_primes(0)


def test_covers():
    table = generate_primes(1000)
    assert table.covers(1000)
    assert table.covers(31)
    assert not table.covers(1001)
