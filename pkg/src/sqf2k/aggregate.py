"""Mergeable scan summaries, record tables, verify reports, checkpoints."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

# Histogram is a fixed-size array indexed by exponent k = 1..64; index 0 is
# unused. 64 is unreachable headroom (k <= 13 observed up to 2^50).
HIST_MAX_K = 64

CHECKPOINT_MAGIC = "sqf2k-checkpoint v1"
REPORT_SCHEMA = "sqf2k-report/1"


def odd_count(start: int, end: int) -> int:
    """Number of odd integers in [start, end)."""
    if end <= start:
        return 0
    return end // 2 - start // 2


@dataclass
class SegmentSummary:
    """Aggregate of one scanned range: histogram of smallest exponents,
    their sum and max, per-m record candidates, and unresolved n values.

    The range [start, end) is a hull; merged summaries may have gaps in
    intermediate reduction trees, but counts always refer to slots
    actually scanned. n = 1 is never scanned.
    """

    start: int
    end: int
    histogram: list[int]  # length HIST_MAX_K + 1, histogram[k] = count
    k_sum: int
    k_max_observed: int
    record_candidates: dict[int, int]  # m -> least n in range with exponent > m
    failures: list[int]  # n with no exponent found up to the scan's k_max

    @classmethod
    def empty(cls) -> "SegmentSummary":
        return cls(0, 0, [0] * (HIST_MAX_K + 1), 0, 0, {}, [])

    @property
    def is_empty(self) -> bool:
        return self.end <= self.start

    @property
    def odd_scanned(self) -> int:
        return sum(self.histogram) + len(self.failures)

    def validate(self) -> None:
        if len(self.histogram) != HIST_MAX_K + 1 or self.histogram[0] != 0:
            raise ValueError("histogram must be indexed 1..64 with slot 0 unused")
        if self.k_sum != sum(k * c for k, c in enumerate(self.histogram)):
            raise ValueError("k_sum does not equal the histogram-weighted sum")
        observed = [k for k, c in enumerate(self.histogram) if c > 0]
        if self.k_max_observed != (max(observed) if observed else 0):
            raise ValueError("k_max_observed does not match histogram support")


def merge(a: SegmentSummary, b: SegmentSummary) -> SegmentSummary:
    """Combine two summaries over disjoint ranges.

    Associative and commutative; SegmentSummary.empty() is the identity.
    Disjointness is checked on the hulls, so reduction trees must only
    join summaries whose hulls do not interleave.
    """
    if a.is_empty:
        return _copy(b)
    if b.is_empty:
        return _copy(a)
    if a.start < b.end and b.start < a.end:
        raise ValueError(
            f"overlapping ranges [{a.start}, {a.end}) and [{b.start}, {b.end})"
        )
    candidates = dict(a.record_candidates)
    for m, n in b.record_candidates.items():
        if m not in candidates or n < candidates[m]:
            candidates[m] = n
    return SegmentSummary(
        start=min(a.start, b.start),
        end=max(a.end, b.end),
        histogram=[x + y for x, y in zip(a.histogram, b.histogram)],
        k_sum=a.k_sum + b.k_sum,
        k_max_observed=max(a.k_max_observed, b.k_max_observed),
        record_candidates=candidates,
        failures=sorted(a.failures + b.failures),
    )


def _copy(s: SegmentSummary) -> SegmentSummary:
    return SegmentSummary(
        s.start,
        s.end,
        list(s.histogram),
        s.k_sum,
        s.k_max_observed,
        dict(s.record_candidates),
        list(s.failures),
    )


@dataclass(frozen=True)
class RecordTable:
    """For each m, the smallest odd n whose smallest exponent exceeds m."""

    entries: dict[int, int]

    def __post_init__(self) -> None:
        last = 0
        for m in sorted(self.entries):
            if self.entries[m] <= last:
                raise ValueError("record values must strictly increase with m")
            last = self.entries[m]


def finalize_records(cumulative: SegmentSummary) -> RecordTable:
    """Turn candidates of a full scan from 1 into the global record table.

    Requires contiguous coverage starting at 1 (a gap could hide a smaller
    record) and no unresolved failures (an n with unknown exponent below a
    candidate could displace it). Contiguity is checked by count
    conservation: every odd slot in the hull except n = 1 must be
    accounted for.
    """
    if cumulative.start != 1:
        raise ValueError(f"records need coverage from 1, got start {cumulative.start}")
    expected = odd_count(1, cumulative.end) - 1  # n = 1 is excluded
    if cumulative.odd_scanned != expected:
        raise ValueError(
            f"coverage gap: scanned {cumulative.odd_scanned} of {expected} odd slots"
        )
    if cumulative.failures:
        raise ValueError(f"unresolved failures remain: {cumulative.failures[:10]}")
    top = cumulative.k_max_observed
    entries = {
        m: n for m, n in cumulative.record_candidates.items() if 1 <= m < top
    }
    return RecordTable(entries)


@dataclass
class VerifyReport:
    """Cumulative state of a verification run; also the checkpoint payload.

    next_start == end means the run is complete. elapsed_s accumulates
    wall time across resumed sessions and never enters report files.
    """

    start: int
    end: int  # normalized: end - start is even
    segment_width: int
    k_max: int
    sequence: int  # number of segments folded in so far
    next_start: int
    elapsed_s: float
    summary: SegmentSummary
    records: RecordTable | None = None
    counterexample_candidates: list[int] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.next_start >= self.end


# -- checkpoint text format ---------------------------------------------------
#
# Versioned, self-describing, bit-exact round-trip:
#
#   sqf2k-checkpoint v1
#   range_start=<int>            start of the requested range
#   range_end=<int>              normalized end of the requested range
#   segment_width=<int>          integers per segment (power of two)
#   k_max=<int>                  exponent search limit used by the scan
#   sequence=<int>               segments merged into the summary so far
#   next_start=<int>             lower bound of the first unscanned segment
#   elapsed_s=<float repr>       cumulative wall time
#   covered_start=<int>          summary hull (0 0 while empty)
#   covered_end=<int>
#   k_sum=<int>
#   k_max_observed=<int>
#   histogram=k:count,...        nonzero cells only, ascending k
#   records=m:n,...              record candidates, ascending m
#   failures=n,...               unresolved n values, ascending
#   counterexamples=n,...        recheck survivors (normally empty)
#   end
#
# The trailing "end" line guards against truncated files.


def _pairs(d: dict[int, int]) -> str:
    return ",".join(f"{k}:{d[k]}" for k in sorted(d))


def _parse_pairs(text: str) -> dict[int, int]:
    if not text:
        return {}
    out: dict[int, int] = {}
    for item in text.split(","):
        k, _, v = item.partition(":")
        out[int(k)] = int(v)
    return out


def _ints(values: list[int]) -> str:
    return ",".join(str(v) for v in values)


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",")] if text else []


def serialize_checkpoint(report: VerifyReport) -> str:
    s = report.summary
    hist = {k: c for k, c in enumerate(s.histogram) if k >= 1 and c > 0}
    lines = [
        CHECKPOINT_MAGIC,
        f"range_start={report.start}",
        f"range_end={report.end}",
        f"segment_width={report.segment_width}",
        f"k_max={report.k_max}",
        f"sequence={report.sequence}",
        f"next_start={report.next_start}",
        f"elapsed_s={report.elapsed_s!r}",
        f"covered_start={s.start}",
        f"covered_end={s.end}",
        f"k_sum={s.k_sum}",
        f"k_max_observed={s.k_max_observed}",
        f"histogram={_pairs(hist)}",
        f"records={_pairs(s.record_candidates)}",
        f"failures={_ints(sorted(s.failures))}",
        f"counterexamples={_ints(report.counterexample_candidates)}",
        "end",
    ]
    return "\n".join(lines) + "\n"


def parse_checkpoint(text: str) -> VerifyReport:
    lines = text.splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError("not a sqf2k checkpoint (bad or missing header)")
    if lines[-1] != "end":
        raise ValueError("truncated checkpoint (missing end marker)")
    fields: dict[str, str] = {}
    for line in lines[1:-1]:
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed checkpoint line: {line!r}")
        fields[key] = value
    try:
        histogram = [0] * (HIST_MAX_K + 1)
        for k, c in _parse_pairs(fields["histogram"]).items():
            histogram[k] = c
        summary = SegmentSummary(
            start=int(fields["covered_start"]),
            end=int(fields["covered_end"]),
            histogram=histogram,
            k_sum=int(fields["k_sum"]),
            k_max_observed=int(fields["k_max_observed"]),
            record_candidates=_parse_pairs(fields["records"]),
            failures=_parse_ints(fields["failures"]),
        )
        return VerifyReport(
            start=int(fields["range_start"]),
            end=int(fields["range_end"]),
            segment_width=int(fields["segment_width"]),
            k_max=int(fields["k_max"]),
            sequence=int(fields["sequence"]),
            next_start=int(fields["next_start"]),
            elapsed_s=float(fields["elapsed_s"]),
            summary=summary,
            counterexample_candidates=_parse_ints(fields["counterexamples"]),
        )
    except KeyError as exc:
        raise ValueError(f"checkpoint missing field {exc}") from exc


def write_checkpoint(report: VerifyReport, path: Path) -> None:
    """Atomic write: temp file in the same directory, fsync, rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    data = serialize_checkpoint(report)
    with open(tmp, "w") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_checkpoint(path: Path) -> VerifyReport:
    with open(path) as fh:
        return parse_checkpoint(fh.read())


# -- report rendering ---------------------------------------------------------
#
# Report files are deliberately free of timing, width, and worker fields:
# two runs over the same range must produce byte-identical reports no
# matter how the range was segmented or whether a run was interrupted.


def report_dict(report: VerifyReport) -> dict:
    s = report.summary
    return {
        "schema": REPORT_SCHEMA,
        "range": {"start": report.start, "end": report.end},
        "odd_scanned": s.odd_scanned,
        "histogram": [[k, c] for k, c in enumerate(s.histogram) if k >= 1 and c > 0],
        "k_sum": s.k_sum,
        "k_max_observed": s.k_max_observed,
        "records": (
            [[m, report.records.entries[m]] for m in sorted(report.records.entries)]
            if report.records is not None
            else None
        ),
        "failures": sorted(s.failures),
        "counterexample_candidates": list(report.counterexample_candidates),
    }


def render_report_json(report: VerifyReport) -> str:
    return json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n"


def render_report_csv(report: VerifyReport) -> str:
    d = report_dict(report)
    lines = ["section,key,value"]
    lines.append(f"range,start,{d['range']['start']}")
    lines.append(f"range,end,{d['range']['end']}")
    lines.append(f"totals,odd_scanned,{d['odd_scanned']}")
    lines.append(f"totals,k_sum,{d['k_sum']}")
    lines.append(f"totals,k_max_observed,{d['k_max_observed']}")
    for k, c in d["histogram"]:
        lines.append(f"histogram,{k},{c}")
    if d["records"] is not None:
        for m, n in d["records"]:
            lines.append(f"records,{m},{n}")
    for n in d["failures"]:
        lines.append(f"failures,,{n}")
    for n in d["counterexample_candidates"]:
        lines.append(f"counterexamples,,{n}")
    return "\n".join(lines) + "\n"


def render_report_text(report: VerifyReport) -> str:
    d = report_dict(report)
    lines = [
        f"range          [{d['range']['start']}, {d['range']['end']})",
        f"odd n scanned  {d['odd_scanned']}",
        f"k_sum          {d['k_sum']}",
        f"k_max observed {d['k_max_observed']}",
        "",
        "  k  count",
    ]
    for k, c in d["histogram"]:
        lines.append(f"{k:>3}  {c}")
    if d["records"] is not None:
        lines.append("")
        lines.append("  m  smallest odd n with exponent > m")
        for m, n in d["records"]:
            lines.append(f"{m:>3}  {n}")
    if d["failures"]:
        lines.append("")
        lines.append(f"unresolved: {d['failures']}")
    if d["counterexample_candidates"]:
        lines.append("")
        lines.append(f"counterexample candidates: {d['counterexample_candidates']}")
    return "\n".join(lines) + "\n"


def render_bfile(records: RecordTable) -> str:
    """OEIS b-file style: one 'm n' pair per line, ascending m."""
    return "".join(f"{m} {records.entries[m]}\n" for m in sorted(records.entries))
