import json
import subprocess
import sys
from dataclasses import replace

import gmpy2
import pytest

import sqf2k.cli as cli
from helpers import VectorOracle
from sqf2k.heuristics import expected_sum, sigma_sum
from sqf2k.primes import generate_primes
from sqf2k.runner import RunConfig, run_verify


def run_cli(*argv) -> int:
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    d = tmp_path_factory.mktemp("verify")
    out, cp = d / "report.json", d / "cp.txt"
    rc = run_cli(
        "verify", "--end", 1 << 20, "--segment-width", 1 << 16,
        "--out", out, "--checkpoint", cp,
    )
    assert rc == cli.EXIT_OK
    return out, cp


def test_verify_report_content(small_report):
    out, _ = small_report
    doc = json.loads(out.read_text())
    assert doc["schema"] == "sqf2k-report/1"
    assert doc["range"] == {"start": 1, "end": (1 << 20) + 1}
    assert doc["odd_scanned"] == 524287
    assert doc["k_sum"] == 637484
    assert dict(map(tuple, doc["records"])) == {
        1: 11, 2: 29, 3: 533, 4: 849, 5: 434977,
    }
    assert doc["failures"] == [] and doc["counterexample_candidates"] == []


def test_verify_stdout_formats(capsys):
    args = ["--start", 3, "--end", 16387, "--segment-width", 1 << 14]
    assert run_cli("verify", *args, "--format", "text") == 0
    text = capsys.readouterr().out
    assert "k_sum" in text and "range" in text
    assert run_cli("verify", *args, "--format", "csv") == 0
    csv = capsys.readouterr().out
    assert csv.splitlines()[0] == "section,key,value"
    assert "records" not in csv  # partial range: no record table


def test_bad_configs_exit_2(tmp_path):
    assert run_cli("verify", "--start", 4, "--end", 100) == cli.EXIT_CONFIG
    assert run_cli("verify", "--start", 9, "--end", 7) == cli.EXIT_CONFIG
    assert run_cli("verify", "--end", 100, "--segment-width", 1000) == cli.EXIT_CONFIG
    assert run_cli("verify", "--end", 100, "--k-max", 40) == cli.EXIT_CONFIG
    assert run_cli("heuristics", "--digits", 12) == cli.EXIT_CONFIG
    assert run_cli("heuristics", "--l-max", 25) == cli.EXIT_CONFIG
    assert run_cli("heuristics", "--m", 5) == cli.EXIT_CONFIG


def test_unknown_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        run_cli("verify", "--end", 100, "--frobnicate")
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run_cli("records")  # missing positional input
    assert exc.value.code == 2


def test_rerun_with_complete_checkpoint_is_stable(small_report, tmp_path):
    out, cp = small_report
    out2 = tmp_path / "r2.json"
    rc = run_cli(
        "verify", "--end", 1 << 20, "--segment-width", 1 << 16,
        "--out", out2, "--checkpoint", cp,
    )
    assert rc == 0
    assert out2.read_bytes() == out.read_bytes()


def test_mismatched_resume_exits_2(small_report, tmp_path):
    _, cp = small_report
    rc = run_cli(
        "verify", "--end", 1 << 21, "--segment-width", 1 << 16,
        "--out", tmp_path / "x.json", "--checkpoint", cp,
    )
    assert rc == cli.EXIT_CONFIG


def test_corrupt_checkpoint_exits_3(small_report, tmp_path):
    _, cp = small_report
    bad = tmp_path / "bad.txt"
    bad.write_text(cp.read_text()[:80])
    rc = run_cli(
        "verify", "--end", 1 << 20, "--segment-width", 1 << 16, "--checkpoint", bad,
        "--out", tmp_path / "x.json",
    )
    assert rc == cli.EXIT_IO


def test_stats_sources_agree(small_report, tmp_path, capsys):
    out, cp = small_report
    assert run_cli("stats", out, "--m", 10**4) == 0
    from_report = capsys.readouterr().out
    assert run_cli("stats", cp, "--m", 10**4) == 0
    from_checkpoint = capsys.readouterr().out
    assert from_report == from_checkpoint
    assert from_report.splitlines()[0].split()[:2] == ["k", "observed"]
    assert run_cli("stats", out, "--m", 10**4, "--format", "csv") == 0
    csv = capsys.readouterr().out
    assert csv.splitlines()[0] == "k,observed,expected,sigma,abs_delta,delta_over_sigma"
    assert len(csv.splitlines()) == 11


def test_stats_missing_file_exits_3(tmp_path):
    assert run_cli("stats", tmp_path / "nope.json") == cli.EXIT_IO


def test_stats_rejects_partial_start(tmp_path, capsys):
    out = tmp_path / "part.json"
    args = ["--start", 1001, "--end", 17385, "--segment-width", 1 << 14]
    assert run_cli("verify", *args, "--out", out) == 0
    capsys.readouterr()
    assert run_cli("stats", out, "--m", 10**4) == cli.EXIT_CONFIG


def test_records_formats(small_report, tmp_path, capsys):
    out, _ = small_report
    assert run_cli("records", out) == 0
    assert capsys.readouterr().out == "1 11\n2 29\n3 533\n4 849\n5 434977\n"
    assert run_cli("records", out, "--format", "csv") == 0
    assert capsys.readouterr().out.splitlines()[0] == "m,n"
    dest = tmp_path / "b.txt"
    assert run_cli("records", out, "--out", dest, "--format", "text") == 0
    assert "smallest odd n" in dest.read_text()


def test_records_need_a_full_range_report(tmp_path, capsys):
    out = tmp_path / "part.json"
    args = ["--start", 1001, "--end", 17385, "--segment-width", 1 << 14]
    assert run_cli("verify", *args, "--out", out) == 0
    capsys.readouterr()
    assert run_cli("records", out) == cli.EXIT_CONFIG
    assert run_cli("records", tmp_path / "nope.json") == cli.EXIT_IO


def test_heuristics_output(capsys):
    assert run_cli("heuristics", "--l-max", 6, "--m", 1000) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0].split() == ["l", "d_l", "c_l", "1-c_l"]
    assert "certificate" in text
    assert run_cli("heuristics", "--l-max", 8, "--m", 1000, "--format", "csv") == 0
    csv = capsys.readouterr().out
    assert csv.splitlines()[0] == "l,d_l,c_l,one_minus_c_l"


def test_counterexample_candidates_exit_4(monkeypatch, capsys):
    real = run_verify(RunConfig(start=1, end=1 << 15, segment_width=1 << 14))
    fake = replace(real, counterexample_candidates=[99999], records=None)
    monkeypatch.setattr(cli, "run_verify", lambda config, progress=None: fake)
    rc = run_cli("verify", "--end", 1 << 15, "--segment-width", 1 << 14)
    assert rc == cli.EXIT_COUNTEREXAMPLE
    assert "counterexample" in capsys.readouterr().err


def test_dump_exponents(tmp_path, capsys):
    dump = tmp_path / "exp.txt"
    rc = run_cli(
        "verify", "--start", 3, "--end", 1027, "--segment-width", 1 << 14,
        "--dump-exponents", dump, "--out", tmp_path / "r.json",
    )
    assert rc == 0
    oracle = VectorOracle(generate_primes(100), 1027)
    lines = dump.read_text().splitlines()
    assert len(lines) == 512
    for line in lines:
        n, k = map(int, line.split())
        assert k == oracle.smallest_exponent(n), n
    rc = run_cli(
        "verify", "--end", 1 << 26, "--dump-exponents", tmp_path / "big.txt",
        "--out", tmp_path / "r2.json",
    )
    assert rc == cli.EXIT_CONFIG


def test_worker_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    common = ["verify", "--end", 1 << 21, "--segment-width", 1 << 16]
    assert run_cli(*common, "--workers", 1, "--out", a) == 0
    assert run_cli(*common, "--workers", 3, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_k_sum_self_consistency_and_heuristic_band(tmp_path, default_constants):
    out = tmp_path / "r.json"
    assert run_cli("verify", "--end", 1 << 26, "--out", out) == 0
    doc = json.loads(out.read_text())
    hist = dict(map(tuple, doc["histogram"]))
    assert doc["k_sum"] == sum(k * c for k, c in hist.items())
    expected = expected_sum(1 << 26, default_constants)
    sigma = sigma_sum(1 << 26, default_constants)
    assert abs(doc["k_sum"] - expected) < 4 * sigma


def test_installed_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "sqf2k.cli", "verify", "--start", "3", "--end", "16387"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["schema"] == "sqf2k-report/1"
