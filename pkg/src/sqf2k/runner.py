"""Verification run orchestration: segmentation, checkpoints, recheck.

One coordinator owns the checkpoint file and the segment loop. Per
segment: sieve (optionally prefetched a segment ahead), scan against the
two-segment window, merge into the cumulative summary, checkpoint. At the
end every NOT_FOUND survivor is rechecked independently (exponents up to
63, trial-division oracle) before anything is called a counterexample
candidate: a scan-level k_max is an artifact of segmentation, not of the
underlying claim.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from sqf2k.aggregate import (
    SegmentSummary,
    VerifyReport,
    finalize_records,
    merge,
    read_checkpoint,
    write_checkpoint,
)
from sqf2k.primes import PrimeTable, generate_primes
from sqf2k.search import DEFAULT_BLOCK_SLOTS, SegmentWindow, scan_segment
from sqf2k.sieve import Segment, is_squarefree_oracle, sieve_segment

RECHECK_K_MAX = 63

Progress = Callable[[str], None]


class ConfigError(Exception):
    """Invalid run configuration or mismatched resume parameters."""


class CheckpointError(Exception):
    """A checkpoint file exists but cannot be parsed."""


@dataclass
class RunConfig:
    start: int = 1
    end: int = 1 << 32
    segment_width: int = 1 << 30
    k_max: int | None = None  # default floor(log2(segment_width))
    workers: int = 0  # 0 means available parallelism
    checkpoint_path: Path | None = None
    block_slots: int = DEFAULT_BLOCK_SLOTS

    @property
    def effective_end(self) -> int:
        # segments cover whole odd slots; widening an odd span by one
        # adds only an even integer, so the scanned odd set is unchanged
        return self.end + 1 if (self.end - self.start) % 2 else self.end

    @property
    def effective_k_max(self) -> int:
        if self.k_max is not None:
            return self.k_max
        return self.segment_width.bit_length() - 1

    @property
    def effective_workers(self) -> int:
        return self.workers if self.workers >= 1 else (os.cpu_count() or 1)

    def validate(self) -> None:
        if self.start < 1 or self.start % 2 == 0:
            raise ConfigError(f"start must be a positive odd integer, got {self.start}")
        if self.end <= self.start:
            raise ConfigError(f"end must exceed start, got [{self.start}, {self.end})")
        w = self.segment_width
        if w < (1 << 14) or w & (w - 1):
            raise ConfigError(f"segment width must be a power of two >= 2^14, got {w}")
        k = self.effective_k_max
        if not 1 <= k <= min(63, w.bit_length() - 1):
            raise ConfigError(
                f"k_max must be in 1..{min(63, w.bit_length() - 1)} "
                f"for width {w}, got {k}"
            )
        if self.workers < 0:
            raise ConfigError(f"workers must be >= 1 (or 0 for auto), got {self.workers}")
        if self.block_slots < 64 or self.block_slots % 64:
            raise ConfigError("block size must be a positive multiple of 64 slots")


def seed_predecessor(
    start: int, k_max: int, primes: PrimeTable
) -> Segment | None:
    """Sieve a window predecessor for a run starting above 1, deep enough
    for every n - 2^k lookup (capped at 1: nothing below is a target)."""
    if start == 1:
        return None
    need_slots = ((1 << (k_max - 1)) + 63) // 64 * 64
    lo = max(1, start - 2 * need_slots)
    return sieve_segment(lo, start, primes)


def _recheck_failure(n: int, primes: PrimeTable) -> int | None:
    """Independent retry for one unresolved n: exponents up to 63 against
    the trial-division oracle. Returns the smallest exponent, or None."""
    for k in range(1, RECHECK_K_MAX + 1):
        m = n - (1 << k)
        if m < 1:
            break
        if is_squarefree_oracle(m, primes):
            return k
    return None


def _fold_resolved(
    summary: SegmentSummary, resolved: dict[int, int]
) -> SegmentSummary:
    """Move rechecked failures (n -> exponent) into the histogram."""
    histogram = list(summary.histogram)
    k_sum = summary.k_sum
    k_max_observed = summary.k_max_observed
    for n, k in resolved.items():
        histogram[k] += 1
        k_sum += k
        k_max_observed = max(k_max_observed, k)
    return SegmentSummary(
        start=summary.start,
        end=summary.end,
        histogram=histogram,
        k_sum=k_sum,
        k_max_observed=k_max_observed,
        record_candidates=dict(summary.record_candidates),
        failures=sorted(n for n in summary.failures if n not in resolved),
    )


def _load_resume_state(
    config: RunConfig,
) -> tuple[SegmentSummary, int, int, float]:
    """State from the checkpoint, validated against the config:
    (summary, sequence, next_start, elapsed)."""
    try:
        cp = read_checkpoint(config.checkpoint_path)
    except ValueError as exc:
        raise CheckpointError(f"{config.checkpoint_path}: {exc}") from exc
    mismatches = [
        name
        for name, have, want in [
            ("range_start", cp.start, config.start),
            ("range_end", cp.end, config.effective_end),
            ("segment_width", cp.segment_width, config.segment_width),
            ("k_max", cp.k_max, config.effective_k_max),
        ]
        if have != want
    ]
    if mismatches:
        raise ConfigError(
            f"checkpoint {config.checkpoint_path} does not match this run "
            f"(differs in: {', '.join(mismatches)})"
        )
    expected_next = min(config.start + cp.sequence * cp.segment_width, cp.end)
    if cp.next_start != expected_next:
        raise ConfigError(
            f"checkpoint is not contiguous: next_start {cp.next_start} "
            f"does not equal segment boundary {expected_next}"
        )
    return cp.summary, cp.sequence, cp.next_start, cp.elapsed_s


def run_verify(
    config: RunConfig,
    *,
    stop_after_segments: int | None = None,
    progress: Progress | None = None,
) -> VerifyReport:
    """Scan [start, end), resuming from the checkpoint when one exists.

    Returns the cumulative report; it is complete (records finalized,
    failures rechecked) only when the whole range has been covered.
    stop_after_segments ends the session early after that many segments,
    for testing interrupted runs.
    """
    config.validate()
    say = progress or (lambda _line: None)
    start, end = config.start, config.effective_end
    width, k_max = config.segment_width, config.effective_k_max
    workers = config.effective_workers

    t0 = time.monotonic()
    primes = generate_primes(math.isqrt(end - 1))
    say(f"prime table to {primes.limit}: {len(primes)} primes")

    if config.checkpoint_path is not None and Path(config.checkpoint_path).exists():
        cumulative, sequence, next_start, elapsed0 = _load_resume_state(config)
        say(f"resuming at {next_start} (segment {sequence})")
    else:
        cumulative, sequence, next_start, elapsed0 = (
            SegmentSummary.empty(),
            0,
            start,
            0.0,
        )

    if next_start < end:
        if sequence == 0:
            previous = seed_predecessor(start, k_max, primes)
        else:
            previous = sieve_segment(next_start - width, next_start, primes)

        pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            prefetched = None
            done_this_session = 0
            while next_start < end:
                if stop_after_segments is not None:
                    if done_this_session >= stop_after_segments:
                        break
                seg_end = min(next_start + width, end)
                t_seg = time.monotonic()
                current = (
                    prefetched.result()
                    if prefetched is not None
                    else sieve_segment(next_start, seg_end, primes)
                )
                prefetched = None
                if pool is not None and seg_end < end:
                    nxt_end = min(seg_end + width, end)
                    prefetched = pool.submit(sieve_segment, seg_end, nxt_end, primes)
                t_sieved = time.monotonic()
                summary = scan_segment(
                    SegmentWindow(previous, current),
                    k_max,
                    block_slots=config.block_slots,
                    workers=workers,
                )
                cumulative = merge(cumulative, summary)
                sequence += 1
                next_start = seg_end
                previous = current
                done_this_session += 1
                if config.checkpoint_path is not None:
                    report = _as_report(config, cumulative, sequence, next_start)
                    report.elapsed_s = elapsed0 + (time.monotonic() - t0)
                    write_checkpoint(report, config.checkpoint_path)
                say(
                    f"segment {sequence} [{summary.start}, {summary.end}): "
                    f"sieve {t_sieved - t_seg:.2f}s, "
                    f"scan {time.monotonic() - t_sieved:.2f}s, "
                    f"k_max_observed {summary.k_max_observed}"
                )
        finally:
            if pool is not None:
                pool.shutdown(wait=False, cancel_futures=True)

    report = _as_report(config, cumulative, sequence, next_start)
    report.elapsed_s = elapsed0 + (time.monotonic() - t0)
    if not report.complete:
        return report

    if cumulative.failures:
        say(f"rechecking {len(cumulative.failures)} unresolved n independently")
        resolved: dict[int, int] = {}
        survivors: list[int] = []
        for n in cumulative.failures:
            k = _recheck_failure(n, primes)
            if k is None:
                survivors.append(n)
            else:
                resolved[n] = k
        cumulative = _fold_resolved(cumulative, resolved)
        report.summary = cumulative
        report.counterexample_candidates = survivors
        if survivors:
            say(f"counterexample candidates survived recheck: {survivors}")
    if start == 1 and not report.counterexample_candidates:
        report.records = finalize_records(cumulative)
    if config.checkpoint_path is not None:
        report.elapsed_s = elapsed0 + (time.monotonic() - t0)
        write_checkpoint(report, config.checkpoint_path)
    return report


def _as_report(
    config: RunConfig, cumulative: SegmentSummary, sequence: int, next_start: int
) -> VerifyReport:
    return VerifyReport(
        start=config.start,
        end=config.effective_end,
        segment_width=config.segment_width,
        k_max=config.effective_k_max,
        sequence=sequence,
        next_start=next_start,
        elapsed_s=0.0,
        summary=cumulative,
    )
