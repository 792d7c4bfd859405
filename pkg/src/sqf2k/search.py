"""Smallest-exponent search: least k >= 1 with n - 2^k squarefree.

Lookups of n - 2^k stay inside a two-segment window (current segment plus
its predecessor), which suffices for k_max <= log2(segment width). The
vectorized scan answers 64 slots per word operation: the flags of n - 2^k
for consecutive odd n are the window's bit string shifted by 2^(k-1)
slots, so each pass is a shift-and-mask over the packed words.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce

import numpy as np

from sqf2k.aggregate import HIST_MAX_K, SegmentSummary, merge
from sqf2k.sieve import Segment, pack_flags

FOUND = "FOUND"
NOT_FOUND = "NOT_FOUND"

# Unit of parallel work and of the deterministic block plan: summaries are
# produced per block and merged in block order, so results are identical
# for any worker count.
DEFAULT_BLOCK_SLOTS = 1 << 20


@dataclass(frozen=True)
class SegmentWindow:
    """Current segment plus its predecessor (absent only at the start of
    a run), answering flag lookups from previous.start to current.end."""

    previous: Segment | None
    current: Segment

    def __post_init__(self) -> None:
        if self.previous is not None and self.previous.end != self.current.start:
            raise ValueError(
                f"segments not adjacent: previous ends at {self.previous.end}, "
                f"current starts at {self.current.start}"
            )

    def flag(self, m: int) -> bool:
        """Squarefree flag of odd m anywhere in the window."""
        if m >= self.current.start:
            return self.current.flag(m)
        if self.previous is None:
            raise ValueError(f"{m} is below the window (no predecessor)")
        return self.previous.flag(m)


@dataclass(frozen=True)
class SearchOutcome:
    n: int
    status: str  # FOUND | NOT_FOUND
    k: int | None = None  # smallest exponent, when found
    m: int | None = None  # n - 2^k, when found

    @property
    def found(self) -> bool:
        return self.status == FOUND


def smallest_exponent(n: int, window: SegmentWindow, k_max: int) -> SearchOutcome:
    """Scalar reference search for one odd n in the current segment.

    Tries k = 1, 2, ... up to k_max; k with 2^k >= n are never tried
    (n - 2^k would not be a positive integer). A lookup below the window
    is a caller bug: the window is too shallow for this k_max.
    """
    cur = window.current
    if n % 2 == 0 or not (cur.start <= n < cur.end):
        raise ValueError(f"{n} is not an odd member of [{cur.start}, {cur.end})")
    if k_max < 1:
        raise ValueError(f"k_max must be positive, got {k_max}")
    low = window.previous.start if window.previous is not None else cur.start
    for k in range(1, k_max + 1):
        m = n - (1 << k)
        if m < 1:
            break
        if m < low:
            raise ValueError(
                f"lookup {m} = {n} - 2^{k} falls below the window at {low}; "
                f"k_max {k_max} exceeds what this window supports"
            )
        if window.flag(m):
            return SearchOutcome(n, FOUND, k, m)
    return SearchOutcome(n, NOT_FOUND)


def _ceil64(n: int) -> int:
    return (n + 63) // 64 * 64


def _window_words(window: SegmentWindow, k_max: int) -> tuple[np.ndarray, int]:
    """Build the packed window: predecessor bits, current bits, one zero
    pad word. Returns (words, predecessor slot count).

    The predecessor region always spans at least 2^(k_max - 1) slots so
    every pass's shifted read stays in bounds. Where no real flags exist
    below the current segment (start of a run, or a predecessor reaching
    down to 1) the region is zero-filled: reads there see "not squarefree",
    which is exact for the nonexistent targets below n = 1.
    """
    cur = window.current
    prev = window.previous
    need = _ceil64(1 << (k_max - 1))
    if prev is None:
        if cur.start != 1:
            raise ValueError(
                f"window starting at {cur.start} needs a predecessor segment"
            )
        prev_slots = need
        prev_words = np.zeros(need // 64, dtype=np.uint64)
    elif prev.n_slots >= need and prev.n_slots % 64 == 0:
        prev_slots = prev.n_slots
        prev_words = prev.words()
    elif prev.start == 1:
        # shallow predecessor reaching 1: zero-pad below it to full depth
        prev_slots = max(need, _ceil64(prev.n_slots))
        flags = np.zeros(prev_slots, dtype=bool)
        flags[prev_slots - prev.n_slots :] = prev.flags_bool()
        prev_words = pack_flags(flags).view(np.uint64)
    else:
        raise ValueError(
            f"predecessor [{prev.start}, {prev.end}) is too shallow or "
            f"unaligned for k_max {k_max}"
        )
    cur_words = cur.words()
    words = np.zeros(len(prev_words) + len(cur_words) + 1, dtype=np.uint64)
    words[: len(prev_words)] = prev_words
    words[len(prev_words) : len(prev_words) + len(cur_words)] = cur_words
    return words, prev_slots


def _shifted_slice(words: np.ndarray, bit_off: int, n_words: int) -> np.ndarray:
    """n_words*64 consecutive bits of the window starting at bit_off."""
    q, r = divmod(bit_off, 64)
    if r == 0:
        return words[q : q + n_words]
    a = words[q : q + n_words]
    b = words[q + 1 : q + 1 + n_words]
    return (a >> np.uint64(r)) | (b << np.uint64(64 - r))


def _first_set_slot(pending: np.ndarray) -> int:
    w = np.flatnonzero(pending)[0]
    word = int(pending[w])
    return int(w) * 64 + ((word & -word).bit_length() - 1)


def _popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


def _pending_mask(n_slots: int, skip_slot_zero: bool) -> np.ndarray:
    pending = np.full((n_slots + 63) // 64, ~np.uint64(0))
    tail = n_slots & 63
    if tail:
        pending[-1] = np.uint64((1 << tail) - 1)
    if skip_slot_zero:
        pending[0] &= ~np.uint64(1)
    return pending


def _scan_block(
    words: np.ndarray,
    prev_slots: int,
    cur_start: int,
    b0: int,
    b1: int,
    k_max: int,
) -> SegmentSummary:
    """Scan the slots [b0, b1) of the current segment into a summary."""
    n_slots = b1 - b0
    n_words = (n_slots + 63) // 64
    # n = 1 is excluded from the conjecture; clear its slot
    pending = _pending_mask(n_slots, skip_slot_zero=(cur_start == 1 and b0 == 0))
    remaining = _popcount(pending)

    histogram = [0] * (HIST_MAX_K + 1)
    candidates: dict[int, int] = {}
    k_sum = 0
    k_max_observed = 0
    for k in range(1, k_max + 1):
        if remaining == 0:
            break
        sl = _shifted_slice(words, prev_slots + b0 - (1 << (k - 1)), n_words)
        newly = pending & sl
        count = _popcount(newly)
        if count:
            histogram[k] = count
            k_sum += k * count
            k_max_observed = k
            pending &= ~sl
            remaining -= count
        if remaining:
            candidates[k] = cur_start + 2 * (b0 + _first_set_slot(pending))

    failures: list[int] = []
    if remaining:
        for i in np.flatnonzero(
            np.unpackbits(pending.view(np.uint8), bitorder="little")[:n_slots]
        ):
            failures.append(cur_start + 2 * (b0 + int(i)))
    return SegmentSummary(
        start=cur_start + 2 * b0,
        end=cur_start + 2 * b1,
        histogram=histogram,
        k_sum=k_sum,
        k_max_observed=k_max_observed,
        record_candidates=candidates,
        failures=failures,
    )


def scan_segment(
    window: SegmentWindow,
    k_max: int,
    *,
    block_slots: int = DEFAULT_BLOCK_SLOTS,
    workers: int = 1,
) -> SegmentSummary:
    """Find the smallest exponent of every odd n in the current segment
    (n = 1 excluded) and aggregate: histogram of exponents, their sum and
    max, record candidates, and any n left unresolved at k_max.

    The block plan is fixed by block_slots alone, and block summaries are
    merged in block order, so the result does not depend on workers.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be positive, got {k_max}")
    if block_slots < 64 or block_slots % 64:
        raise ValueError("block_slots must be a positive multiple of 64")
    words, prev_slots = _window_words(window, k_max)
    cur = window.current
    blocks = [
        (b0, min(b0 + block_slots, cur.n_slots))
        for b0 in range(0, cur.n_slots, block_slots)
    ]

    def scan_one(block: tuple[int, int]) -> SegmentSummary:
        return _scan_block(words, prev_slots, cur.start, block[0], block[1], k_max)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(scan_one, blocks))
    else:
        parts = [scan_one(b) for b in blocks]
    return reduce(merge, parts, SegmentSummary.empty())


def scan_exponents(window: SegmentWindow, k_max: int) -> np.ndarray:
    """Per-slot smallest exponents of the current segment, for debugging
    small ranges: entry i is the exponent of n = start + 2i, or 0 when
    unresolved at k_max (and for the excluded n = 1).

    Aggregate scans never store this; it exists for spot checks and the
    small-range debug flag only.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be positive, got {k_max}")
    words, prev_slots = _window_words(window, k_max)
    cur = window.current
    n_slots = cur.n_slots
    n_words = (n_slots + 63) // 64
    pending = _pending_mask(n_slots, skip_slot_zero=(cur.start == 1))
    kvals = np.zeros(n_slots, dtype=np.uint8)
    for k in range(1, k_max + 1):
        if not pending.any():
            break
        sl = _shifted_slice(words, prev_slots - (1 << (k - 1)), n_words)
        newly = pending & sl
        mask = np.unpackbits(newly.view(np.uint8), bitorder="little")[:n_slots]
        kvals[mask.astype(bool)] = k
        pending &= ~sl
    return kvals
