"""Segmented squarefree sieve over odd integers, one packed bit per slot."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from sqf2k.primes import PrimeTable, generate_primes

# Slot i of a segment is the odd integer n = start + 2i; bit i lives in
# byte i >> 3 at position i & 7 (LSB-first). Buffers are padded to a
# multiple of 8 bytes so they view cleanly as uint64 words.
BIT_CONVENTION = "slot (n - start)/2, LSB-first, 1 = squarefree"


@dataclass(frozen=True)
class Segment:
    """Squarefree flags for the odd integers in [start, end)."""

    start: int  # odd, inclusive
    end: int  # exclusive; end - start is even
    bits: np.ndarray  # uint8, padded to a multiple of 8 bytes

    def __post_init__(self) -> None:
        if self.start < 1 or self.start % 2 == 0:
            raise ValueError(f"start must be a positive odd integer, got {self.start}")
        if self.end <= self.start or (self.end - self.start) % 2 != 0:
            raise ValueError(f"bad segment bounds [{self.start}, {self.end})")
        expected = _padded_bytes(self.n_slots)
        if self.bits.dtype != np.uint8 or self.bits.nbytes != expected:
            raise ValueError("bit buffer does not match segment bounds")

    @property
    def width(self) -> int:
        return self.end - self.start

    @property
    def n_slots(self) -> int:
        return self.width // 2

    def flag(self, n: int) -> bool:
        """Squarefree flag of odd n, which must lie in [start, end)."""
        if n < self.start or n >= self.end or n % 2 == 0:
            raise ValueError(f"{n} is not an odd member of [{self.start}, {self.end})")
        i = (n - self.start) // 2
        return bool((self.bits[i >> 3] >> (i & 7)) & 1)

    def words(self) -> np.ndarray:
        """The flag bits as uint64 words, LSB-first."""
        return self.bits.view(np.uint64)

    def flags_bool(self) -> np.ndarray:
        """Unpacked bool flags, one per slot. For tests and small dumps."""
        return np.unpackbits(self.bits, bitorder="little")[: self.n_slots].astype(bool)


def _padded_bytes(n_slots: int) -> int:
    return ((n_slots + 63) // 64) * 8


def pack_flags(flags: np.ndarray) -> np.ndarray:
    """Pack a bool flag array into the padded uint8 layout Segment expects."""
    packed = np.packbits(flags, bitorder="little")
    padded = np.zeros(_padded_bytes(len(flags)), dtype=np.uint8)
    padded[: len(packed)] = packed
    return padded


def sieve_flags(start: int, end: int, primes: PrimeTable) -> np.ndarray:
    """Bool squarefree flags for the odd integers in [start, end).

    Marks, for each odd prime p with p^2 < end, every odd multiple of p^2
    in the interval. The prime 2 is skipped: an odd n is never divisible
    by 4. The slot stride between odd multiples of p^2 is p^2 (i.e. 2*p^2
    in integer terms).
    """
    if start % 2 == 0 or start < 1:
        raise ValueError(f"start must be a positive odd integer, got {start}")
    if end <= start:
        raise ValueError(f"end must exceed start, got [{start}, {end})")
    if (end - start) % 2 != 0:
        raise ValueError(f"segment must cover whole odd slots, got [{start}, {end})")
    root = math.isqrt(end - 1)
    if not primes.covers(root):
        raise ValueError(f"prime table limit {primes.limit} < required {root}")

    n_slots = (end - start) // 2
    flags = np.ones(n_slots, dtype=bool)
    for p in primes.primes:
        p = int(p)
        if p == 2:
            continue
        p2 = p * p
        if p2 >= end:
            break
        # smallest odd multiple of p^2 that is >= start
        m = -(-start // p2) * p2
        if m % 2 == 0:
            m += p2
        if m >= end:
            continue
        flags[(m - start) // 2 :: p2] = False
    return flags


def sieve_segment(start: int, end: int, primes: PrimeTable) -> Segment:
    """Sieve the odd integers in [start, end) into a packed Segment."""
    return Segment(start, end, pack_flags(sieve_flags(start, end, primes)))


def is_squarefree_oracle(n: int, primes: PrimeTable | None = None) -> bool:
    """Trial division by p^2 for every prime p <= sqrt(n).

    Deliberately slow and independent of the sieve; the trusted side of
    every dual-route check. 1 is squarefree (empty product).
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    root = math.isqrt(n)
    if primes is None or not primes.covers(root):
        primes = generate_primes(max(root, 1))
    for p in primes.primes:
        p = int(p)
        if p > root:
            break
        if n % (p * p) == 0:
            return False
    return True


def dump_segment(segment: Segment, out: TextIO, bytes_per_line: int = 32) -> None:
    """Debug dump: 3-line header (start, end, bit convention), then hex."""
    out.write(f"start {segment.start}\n")
    out.write(f"end {segment.end}\n")
    out.write(f"bits {BIT_CONVENTION}\n")
    raw = segment.bits.tobytes()
    for i in range(0, len(raw), bytes_per_line):
        out.write(raw[i : i + bytes_per_line].hex() + "\n")
