"""Command-line surface: verify / heuristics / stats / records.

Exit codes: 0 success, 2 configuration error (argparse uses the same
code for bad flags), 3 I/O error (missing or unreadable input files),
4 a counterexample candidate survived the independent recheck.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from sqf2k.aggregate import (
    CHECKPOINT_MAGIC,
    REPORT_SCHEMA,
    RecordTable,
    parse_checkpoint,
    render_bfile,
    render_report_csv,
    render_report_json,
    render_report_text,
)
from sqf2k.heuristics import compute_constants, render_tables
from sqf2k.runner import (
    CheckpointError,
    ConfigError,
    RunConfig,
    run_verify,
    seed_predecessor,
)
from sqf2k.search import SegmentWindow, scan_exponents
from sqf2k.sieve import sieve_segment
from sqf2k.primes import generate_primes
from sqf2k.stats import compare, render_comparison_csv, render_comparison_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_COUNTEREXAMPLE = 4

DUMP_SPAN_LIMIT = 1 << 25  # debug exponent dumps stay small by design


class InputFileError(Exception):
    """A required input file is missing, unreadable, or malformed."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqf2k",
        description=(
            "Verify that every odd n > 1 in a range is a squarefree number "
            "plus a power of two, and compare against heuristic expectations."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="scan a range of odd integers")
    p.add_argument("--start", type=int, default=1, help="range start (odd, default 1)")
    p.add_argument("--end", type=int, default=1 << 32, help="range end, exclusive")
    p.add_argument(
        "--segment-width",
        type=int,
        default=1 << 30,
        help="integers per segment, a power of two >= 2^14 (default 2^30)",
    )
    p.add_argument(
        "--k-max",
        type=int,
        default=None,
        help="exponent search limit (default floor(log2(segment width)))",
    )
    p.add_argument(
        "--workers",
        type=int,
        default=0,
        help="worker threads; 0 means available parallelism (default)",
    )
    p.add_argument("--checkpoint", type=Path, default=None, help="checkpoint file")
    p.add_argument("--out", type=Path, default=None, help="report file (default stdout)")
    p.add_argument("--format", choices=["json", "csv", "text"], default="json")
    p.add_argument(
        "--dump-exponents",
        type=Path,
        default=None,
        metavar="PATH",
        help="debug: write per-n exponents ('n k' lines); small ranges only",
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("heuristics", help="emit the model's constant tables")
    p.add_argument("--l-max", type=int, default=20, help="largest l (default 20)")
    p.add_argument(
        "--m", type=int, default=10**7, help="prime truncation limit (default 10^7)"
    )
    p.add_argument(
        "--digits", type=int, default=40, help="significant digits (default 40)"
    )
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_heuristics)

    p = sub.add_parser(
        "stats", help="compare a report's histogram against the heuristics"
    )
    p.add_argument("input", type=Path, help="report (json) or checkpoint file")
    p.add_argument("--m", type=int, default=10**7)
    p.add_argument("--digits", type=int, default=40)
    p.add_argument(
        "--convention",
        choices=["half", "exact"],
        default="half",
        help="sample count N: span/2 (reference figures) or the exact odd count",
    )
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("records", help="emit the record table from a report")
    p.add_argument("input", type=Path, help="report file (json)")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=["bfile", "text", "csv"], default="bfile")
    p.set_defaults(func=cmd_records)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _say(line: str) -> None:
    print(line, file=sys.stderr)


def cmd_verify(args: argparse.Namespace) -> int:
    config = RunConfig(
        start=args.start,
        end=args.end,
        segment_width=args.segment_width,
        k_max=args.k_max,
        workers=args.workers,
        checkpoint_path=args.checkpoint,
    )
    if args.dump_exponents is not None:
        span = config.effective_end - config.start
        if span > DUMP_SPAN_LIMIT:
            raise ConfigError(
                f"exponent dumps cover at most {DUMP_SPAN_LIMIT} integers, got {span}"
            )
    report = run_verify(config, progress=_say)
    render = {
        "json": render_report_json,
        "csv": render_report_csv,
        "text": render_report_text,
    }[args.format]
    _emit(render(report), args.out)
    if args.dump_exponents is not None:
        _dump_exponents(config, args.dump_exponents)
    if report.counterexample_candidates:
        _say(
            "counterexample candidates survived independent recheck: "
            f"{report.counterexample_candidates}"
        )
        return EXIT_COUNTEREXAMPLE
    return EXIT_OK


def _dump_exponents(config: RunConfig, path: Path) -> None:
    """Debug dump of per-n exponents over one small range (validated
    against DUMP_SPAN_LIMIT before the verify run starts)."""
    start, end = config.start, config.effective_end
    span = end - start
    width = 1 << max(14, (span - 1).bit_length())
    k_max = width.bit_length() - 1
    primes = generate_primes(math.isqrt(end - 1))
    window = SegmentWindow(
        seed_predecessor(start, k_max, primes), sieve_segment(start, end, primes)
    )
    kvals = scan_exponents(window, k_max)
    with open(path, "w") as fh:
        for i, k in enumerate(kvals):
            n = start + 2 * i
            if n == 1:
                continue
            fh.write(f"{n} {int(k)}\n")


def _load_histogram_source(path: Path) -> tuple[dict[int, int], int]:
    """Histogram and range end from a report or checkpoint file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    if text.startswith(CHECKPOINT_MAGIC):
        try:
            cp = parse_checkpoint(text)
        except ValueError as exc:
            raise InputFileError(f"{path}: {exc}") from exc
        if cp.start != 1:
            raise ConfigError(f"stats need a scan from 1, got start {cp.start}")
        if not cp.complete:
            _say(f"note: checkpoint covers only [1, {cp.summary.end}); comparing that")
        hist = {k: c for k, c in enumerate(cp.summary.histogram) if k and c}
        return hist, cp.summary.end
    try:
        doc = json.loads(text)
        if doc.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unknown schema {doc.get('schema')!r}")
        hist = {int(k): int(c) for k, c in doc["histogram"]}
        rng = doc["range"]
        if rng["start"] != 1:
            raise ConfigError(f"stats need a scan from 1, got start {rng['start']}")
        return hist, int(rng["end"])
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise InputFileError(f"{path} is not a report or checkpoint: {exc}") from exc


def cmd_stats(args: argparse.Namespace) -> int:
    histogram, range_end = _load_histogram_source(args.input)
    constants = compute_constants(m=args.m, digits=args.digits)
    rows = compare(histogram, range_end, constants, convention=args.convention)
    render = {"text": render_comparison_text, "csv": render_comparison_csv}[args.format]
    _emit(render(rows), args.out)
    return EXIT_OK


def cmd_heuristics(args: argparse.Namespace) -> int:
    constants = compute_constants(l_max=args.l_max, m=args.m, digits=args.digits)
    _emit(render_tables(constants, args.format), args.out)
    return EXIT_OK


def _load_records(path: Path) -> RecordTable:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputFileError(f"{path} is not a report: {exc}") from exc
    if doc.get("schema") != REPORT_SCHEMA:
        raise InputFileError(f"{path} is not a report (schema {doc.get('schema')!r})")
    if doc.get("records") is None:
        raise ConfigError(
            f"{path} has no finalized records (partial range, or not from 1)"
        )
    return RecordTable({int(m): int(n) for m, n in doc["records"]})


def cmd_records(args: argparse.Namespace) -> int:
    records = _load_records(args.input)
    if args.format == "bfile":
        out = render_bfile(records)
    elif args.format == "csv":
        out = "m,n\n" + "".join(
            f"{m},{records.entries[m]}\n" for m in sorted(records.entries)
        )
    else:
        out = "  m  smallest odd n with exponent > m\n" + "".join(
            f"{m:>3}  {records.entries[m]}\n" for m in sorted(records.entries)
        )
    _emit(out, args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputFileError, CheckpointError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
