"""Ascending prime tables shared by the sieve and the heuristic products."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PrimeTable:
    """All primes p <= limit, ascending, built once and shared read-only."""

    limit: int
    primes: np.ndarray  # int64, strictly increasing

    def __len__(self) -> int:
        return len(self.primes)

    def covers(self, bound: int) -> bool:
        """True if the table contains every prime <= bound."""
        return self.limit >= bound


def generate_primes(limit: int) -> PrimeTable:
    """Classic full sieve of Eratosthenes up to and including limit.

    limit < 2 yields an empty table, not an error.
    """
    if limit < 1:
        raise ValueError(f"limit must be positive, got {limit}")
    if limit < 2:
        return PrimeTable(limit, np.empty(0, dtype=np.int64))
    composite = np.zeros(limit + 1, dtype=bool)
    composite[:2] = True
    for p in range(2, math.isqrt(limit) + 1):
        if not composite[p]:
            composite[p * p :: p] = True
    return PrimeTable(limit, np.flatnonzero(~composite).astype(np.int64))
