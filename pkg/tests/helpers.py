"""Shared test helpers: golden-figure comparison and slow reference oracles."""

from decimal import Decimal

import numpy as np

from sqf2k.heuristics import format_sig


def as_decimal(value) -> Decimal:
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(format_sig(value, 45))


def assert_prints_as(value, printed: str) -> None:
    """value agrees with a golden figure to one unit in its last printed
    digit. Golden tables mix round-to-nearest and truncation, and both
    land within one ulp of the underlying value."""
    target = Decimal(printed)
    ulp = Decimal(1).scaleb(target.as_tuple().exponent)
    got = as_decimal(value)
    assert abs(got - target) <= ulp, f"{got} is not {printed} +- {ulp}"


def assert_leading_digits(value, printed: str) -> None:
    """value agrees with the golden figure under either print convention:
    the golden is the truncation of value's expansion, or its rounding to
    the same number of digits (the golden tables mix both)."""
    target = Decimal(printed)
    ulp = Decimal(1).scaleb(target.as_tuple().exponent)
    got = as_decimal(value)
    assert target - ulp / 2 <= got < target + ulp, (
        f"{got} neither truncates nor rounds to {printed}"
    )


def assert_starts_with(value, printed: str) -> None:
    """value's decimal expansion begins with the golden digits: the golden
    figure is an explicit truncation (an ellipsis in the source table), so
    printed <= value < printed + ulp."""
    target = Decimal(printed)
    ulp = Decimal(1).scaleb(target.as_tuple().exponent)
    got = as_decimal(value)
    assert target <= got < target + ulp, f"{got} does not start with {printed}"


class VectorOracle:
    """Squarefree test by direct divisibility: n % p^2 over every prime
    p <= sqrt(bound). Independent of the sieve's strided marking and fast
    enough for bulk property checks."""

    def __init__(self, primes, bound: int):
        psq = primes.primes.astype(np.uint64) ** 2
        if int(psq[-1]) < bound:
            raise ValueError("prime table too small for this bound")
        self.psq = psq
        self.bound = bound

    def squarefree(self, n: int) -> bool:
        if not 1 <= n < self.bound:
            raise ValueError(f"{n} outside oracle bound {self.bound}")
        cut = int(np.searchsorted(self.psq, np.uint64(n), side="right"))
        return not bool((np.uint64(n) % self.psq[:cut] == 0).any())

    def smallest_exponent(self, n: int, k_max: int = 63) -> int | None:
        for k in range(1, k_max + 1):
            m = n - (1 << k)
            if m < 1:
                return None
            if self.squarefree(m):
                return k
        return None
