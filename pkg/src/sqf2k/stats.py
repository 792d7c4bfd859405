"""Observed exponent histograms versus heuristic expectations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2

from sqf2k.heuristics import HeuristicConstants, working_precision


@dataclass(frozen=True)
class ComparisonRow:
    k: int
    observed: int
    expected: float
    sigma: float
    delta: float  # |observed - expected|
    ratio: float  # delta / sigma

    def __post_init__(self) -> None:
        if not (math.isfinite(self.expected) and math.isfinite(self.ratio)):
            raise ValueError("comparison values must be finite")


def sample_count(range_end: int, convention: str = "half") -> int:
    """Number of odd n with 1 < n < range_end under the given convention.

    "half" divides the span by two, the approximation the reference
    figures were computed with; "exact" counts the odd integers exactly.
    Both agree on which n were scanned; they differ by one in N.
    """
    if convention == "half":
        return range_end // 2
    if convention == "exact":
        return (range_end - 2) // 2
    raise ValueError(f"unknown convention {convention!r}")


def compare(
    histogram: dict[int, int],
    range_end: int,
    constants: HeuristicConstants,
    *,
    convention: str = "half",
    k_top: int | None = None,
) -> list[ComparisonRow]:
    """Per-exponent comparison rows for a scan of [1, range_end).

    For each k: expected = N*p_k with p_k = c_k - c_(k-1), and
    sigma = sqrt(N*p_k*(1-p_k)), the binomial standard deviation.
    Rows run from k = 1 to max(largest observed k, 10).
    """
    observed_top = max((k for k, c in histogram.items() if c), default=0)
    if k_top is None:
        k_top = max(observed_top, 10)
    if k_top > constants.l_max:
        raise ValueError(
            f"need constants up to l = {k_top}, have l_max = {constants.l_max}"
        )
    n = sample_count(range_end, convention)
    rows = []
    with working_precision(constants.digits):
        for k in range(1, k_top + 1):
            p = constants.c[k] - constants.c[k - 1]
            expected = n * p
            sigma = gmpy2.sqrt(n * p * (1 - p))
            observed = histogram.get(k, 0)
            delta = abs(observed - expected)
            rows.append(
                ComparisonRow(
                    k=k,
                    observed=observed,
                    expected=float(expected),
                    sigma=float(sigma),
                    delta=float(delta),
                    ratio=float(delta / sigma),
                )
            )
    return rows


def render_comparison_text(rows: list[ComparisonRow]) -> str:
    """Aligned table, one decimal for expected/sigma/|delta|, four for
    the sigma ratio."""
    lines = ["  k    observed       expected        sigma       |delta|  |delta|/sigma"]
    for r in rows:
        lines.append(
            f"{r.k:>3}  {r.observed:>10}  {r.expected:>13.1f}  {r.sigma:>11.1f}"
            f"  {r.delta:>12.1f}  {r.ratio:>13.4f}"
        )
    return "\n".join(lines) + "\n"


def render_comparison_csv(rows: list[ComparisonRow]) -> str:
    lines = ["k,observed,expected,sigma,abs_delta,delta_over_sigma"]
    for r in rows:
        lines.append(
            f"{r.k},{r.observed},{r.expected:.6f},{r.sigma:.6f},"
            f"{r.delta:.6f},{r.ratio:.6f}"
        )
    return "\n".join(lines) + "\n"
