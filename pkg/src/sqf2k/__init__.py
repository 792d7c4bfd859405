"""Verification toolkit for representing odd integers as squarefree + 2^k.

Scans ranges of odd n with a segmented squarefree sieve, finds the smallest
exponent k with n - 2^k squarefree, aggregates mergeable statistics and
record tables with checkpoint/resume, and independently computes the
heuristic constants the observed counts are compared against.
"""

from sqf2k.primes import PrimeTable, generate_primes
from sqf2k.sieve import Segment, is_squarefree_oracle, sieve_segment
from sqf2k.search import SearchOutcome, SegmentWindow, scan_segment, smallest_exponent
from sqf2k.aggregate import RecordTable, SegmentSummary, VerifyReport, finalize_records, merge
from sqf2k.heuristics import HeuristicConstants, compute_constants
from sqf2k.runner import RunConfig, run_verify

__version__ = "0.1.0"

__all__ = [
    "PrimeTable",
    "generate_primes",
    "Segment",
    "sieve_segment",
    "is_squarefree_oracle",
    "SegmentWindow",
    "SearchOutcome",
    "smallest_exponent",
    "scan_segment",
    "SegmentSummary",
    "RecordTable",
    "VerifyReport",
    "merge",
    "finalize_records",
    "HeuristicConstants",
    "compute_constants",
    "RunConfig",
    "run_verify",
    "__version__",
]
