import random

import numpy as np
import pytest

from helpers import VectorOracle
from sqf2k.primes import generate_primes
from sqf2k.runner import seed_predecessor
from sqf2k.search import (
    NOT_FOUND,
    SegmentWindow,
    scan_exponents,
    scan_segment,
    smallest_exponent,
)
from sqf2k.sieve import sieve_segment

PRIMES = generate_primes(10**5)


def low_window(end: int, primes=PRIMES) -> SegmentWindow:
    return SegmentWindow(None, sieve_segment(1, end | 1, primes))


def test_known_smallest_exponents():
    window = low_window(2048)
    for n, k in [(3, 1), (5, 1), (11, 2), (29, 3), (533, 4), (849, 5)]:
        out = smallest_exponent(n, window, 10)
        assert out.found and out.k == k, n
    # 127 - 2 = 125 = 5^3, 127 - 4 = 123 = 3*41
    assert smallest_exponent(127, window, 10).k == 2


def test_scalar_search_matches_oracle_small():
    window = low_window(1 << 17)
    oracle = VectorOracle(PRIMES, 1 << 17)
    for n in range(3, 10**5, 2):
        out = smallest_exponent(n, window, 17)
        assert out.found
        assert out.k == oracle.smallest_exponent(n), n
        assert out.m == n - (1 << out.k)


def test_vector_scan_matches_scalar_low_start():
    window = low_window(1 << 14)
    kvals = scan_exponents(window, 13)
    assert kvals[0] == 0  # n = 1 is out of scope
    for i in range(1, window.current.n_slots):
        n = 1 + 2 * i
        assert kvals[i] == smallest_exponent(n, window, 13).k, n


@pytest.mark.parametrize("seed", range(4))
def test_vector_scan_matches_scalar_high_start(seed, primes_1m):
    rng = random.Random(seed)
    start = rng.randrange(1 << 20, 1 << 34) | 1
    k_max = 14
    window = SegmentWindow(
        seed_predecessor(start, k_max, primes_1m),
        sieve_segment(start, start + (1 << 14), primes_1m),
    )
    kvals = scan_exponents(window, k_max)
    for i in range(window.current.n_slots):
        n = start + 2 * i
        out = smallest_exponent(n, window, k_max)
        assert out.found and kvals[i] == out.k, n


def test_summary_of_low_range():
    summary = scan_segment(low_window(1 << 14), 13)
    # every odd n in [3, 2^14) resolves; n = 1 is excluded from the counts
    assert sum(summary.histogram) == 8191
    assert summary.failures == []
    assert summary.k_sum == sum(k * c for k, c in enumerate(summary.histogram))
    assert summary.record_candidates[1] == 11
    assert summary.record_candidates[2] == 29
    assert summary.record_candidates[3] == 533
    assert summary.record_candidates[4] == 849


def test_shallow_k_max_reports_failures():
    summary = scan_segment(low_window(1 << 14), 2)
    oracle = VectorOracle(PRIMES, 1 << 14)
    expect = [
        n for n in range(3, 1 << 14, 2) if (oracle.smallest_exponent(n) or 99) > 2
    ]
    assert summary.failures == expect
    assert scan_exponents(low_window(1 << 14), 2)[(expect[0] - 1) // 2] == 0


def test_block_split_and_workers_do_not_change_results():
    window = low_window(1 << 15)
    base = scan_segment(window, 14)
    assert scan_segment(window, 14, block_slots=1 << 8) == base
    assert scan_segment(window, 14, block_slots=1 << 8, workers=4) == base


def test_search_outcome_not_found():
    # 127 - 2 = 125 = 5^3, so k_max = 1 cannot resolve 127
    window = low_window(256)
    out = smallest_exponent(127, window, 1)
    assert out.status == NOT_FOUND and not out.found and out.k is None


def test_window_rejects_gaps_and_shallow_lookups():
    a = sieve_segment(1, (1 << 14) + 1, PRIMES)
    b = sieve_segment((1 << 14) + 3, (1 << 15) + 1, PRIMES)
    with pytest.raises(ValueError):
        SegmentWindow(a, b)  # not adjacent
    window = SegmentWindow(None, sieve_segment(101, 101 + (1 << 14), PRIMES))
    with pytest.raises(ValueError):
        # no predecessor and start > 1: 101 - 2 dips below the floor
        smallest_exponent(101, window, 8)
    with pytest.raises(ValueError):
        scan_exponents(window, 8)


def test_scan_rejects_k_max_beyond_window_depth():
    start = (1 << 20) + 1
    prev = seed_predecessor(start, 8, PRIMES)  # 256-slot reach, padded to 256
    window = SegmentWindow(prev, sieve_segment(start, start + (1 << 14), PRIMES))
    with pytest.raises(ValueError):
        scan_exponents(window, 14)  # needs 2^13 predecessor slots
