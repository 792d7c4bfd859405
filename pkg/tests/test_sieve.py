import io

import numpy as np
import pytest

from sqf2k.primes import generate_primes
from sqf2k.sieve import (
    Segment,
    dump_segment,
    is_squarefree_oracle,
    pack_flags,
    sieve_flags,
    sieve_segment,
)

PRIMES = generate_primes(10**4)


def test_small_segment_exact():
    seg = sieve_segment(3, 33, PRIMES)
    marked = {n for n in range(3, 33, 2) if not seg.flag(n)}
    assert marked == {9, 25, 27}


def test_one_is_squarefree():
    seg = sieve_segment(1, 3, PRIMES)
    assert seg.flag(1)
    assert is_squarefree_oracle(1)


def test_matches_oracle_above_a_million():
    start, end = 10**6 + 1, 10**6 + 2001
    seg = sieve_segment(start, end, PRIMES)
    for n in range(start, end, 2):
        assert seg.flag(n) == is_squarefree_oracle(n, PRIMES), n


def test_oracle_spot_values():
    assert is_squarefree_oracle(2 * 3 * 5 * 7)
    assert not is_squarefree_oracle(2**2 * 3)
    assert not is_squarefree_oracle(3**3)
    assert not is_squarefree_oracle(1000003**2)  # p^2 for a large prime
    with pytest.raises(ValueError):
        is_squarefree_oracle(0)


def test_squarefree_density_high_range():
    # odd squarefree density is prod over odd p of (1 - p^-2) ~ 0.8106
    primes = generate_primes(1 << 20)
    start = (1 << 39) + 1
    seg = sieve_segment(start, start + (1 << 21), primes)
    density = seg.flags_bool().mean()
    assert abs(density - 0.8106) < 0.01


def test_segment_split_is_seamless():
    a, b, c = 10**5 + 1, 10**5 + 40001, 10**5 + 80001
    whole = sieve_segment(a, c, PRIMES).flags_bool()
    left = sieve_segment(a, b, PRIMES).flags_bool()
    right = sieve_segment(b, c, PRIMES).flags_bool()
    assert np.array_equal(whole, np.concatenate([left, right]))


def test_pack_round_trip():
    rng = np.random.default_rng(5)
    for slots in (1, 63, 64, 65, 1000):
        flags = rng.random(slots) < 0.8
        seg = Segment(1, 1 + 2 * slots, pack_flags(flags))
        assert np.array_equal(seg.flags_bool(), flags)
        assert seg.n_slots == slots
        assert len(seg.bits) % 8 == 0  # whole 64-bit words


def test_words_view_lsb_first():
    flags = np.zeros(64, dtype=bool)
    flags[0] = flags[3] = True
    seg = Segment(1, 129, pack_flags(flags))
    assert seg.words().tolist() == [0b1001]


def test_rejects_bad_ranges():
    with pytest.raises(ValueError):
        sieve_flags(4, 10, PRIMES)
    with pytest.raises(ValueError):
        sieve_flags(11, 11, PRIMES)
    with pytest.raises(ValueError):
        sieve_flags(3, 10, PRIMES)  # covers half a slot
    with pytest.raises(ValueError):
        sieve_flags(3, 10**9, generate_primes(100))  # table too small


def test_dump_format():
    seg = sieve_segment(3, 33, PRIMES)
    out = io.StringIO()
    dump_segment(seg, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "start 3"
    assert lines[1] == "end 33"
    assert lines[2].startswith("bits ")
    assert all(c in "0123456789abcdef" for c in lines[3])
