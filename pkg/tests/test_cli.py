import csv
import json
import os
import subprocess
import sys

import pytest

from coexline import cli


def run(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def test_verify_reports_json(capsys):
    assert run(["verify", "--n", "6", "--a", "3", "--b", "3"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["check"] for r in rows} >= {"two_line_marginal_vs_ctmc", "walk_law_vs_split_law"}
    for r in rows:
        assert set(r) == {"check", "n", "a", "b", "metric", "value", "tolerance", "pass"}
        assert r["pass"]


def test_verify_exact_rational(capsys):
    assert run(["verify", "--n", "4", "--a", "3", "--b", "1.5", "--exact-rational"]) == 0
    rows = json.loads(capsys.readouterr().out)
    exact = [r for r in rows if r["check"].startswith("exact_")]
    assert len(exact) == 2 and all(r["value"] == 0.0 for r in exact)


def test_verify_csv_and_rates(capsys):
    assert run(["verify", "--n", "3", "--alpha", "0.25", "--beta", "0.5", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split(",")[:4] == ["check", "n", "a", "b"]
    assert lines[1].split(",")[2:4] == ["3.0", "1.0"]


def test_sample_schema_and_repeatability(tmp_path):
    out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    argv = ["sample", "--n", "10", "--a", "3", "--b", "3", "--replicas", "2", "--seed", "1"]
    assert run(argv + ["--out", str(out1)]) == 0
    assert run(argv + ["--out", str(out2), "--workers", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = list(csv.reader(out1.open()))
    assert rows[0] == ["n", "seed", "replica", "T_n", "tau_star", "occupations"]
    assert [r[2] for r in rows[1:]] == ["0", "1"]
    for r in rows[1:]:
        assert len(r[5]) == 10 and set(r[5]) <= {"0", "1"}
        assert 0 <= int(r[3]) <= 10 and 0 <= int(r[4]) <= 10


def test_b_defaults_to_a(capsys):
    assert run(["sample", "--n", "5", "--a", "2", "--replicas", "3", "--seed", "4"]) == 0
    x = capsys.readouterr().out
    assert run(["sample", "--n", "5", "--a", "2", "--b", "2", "--replicas", "3", "--seed", "4"]) == 0
    assert capsys.readouterr().out == x


def test_fluct_outputs(tmp_path):
    out, summary = tmp_path / "rec.csv", tmp_path / "sum.json"
    code = run([
        "fluct", "--n", "200", "--a", "3", "--replicas", "3000", "--seed", "42",
        "--times", "0.5,1", "--out", str(out), "--summary", str(summary), "--ladder", "50,200",
        "--ladder-replicas", "500",
    ])
    checks = json.loads(summary.read_text())
    assert code == (0 if all(c["pass"] for c in checks) else 1)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["u_hat", "W_0.5", "W_1.0"]
    assert len(rows) == 3001


def test_fluct_failing_check_exits_one(capsys):
    # 200 replicas at n = 20 cannot meet the KS tolerance of the full-scale run
    assert run(["fluct", "--n", "20", "--a", "3", "--replicas", "200", "--seed", "0", "--ladder", "20"]) == 1
    checks = json.loads(capsys.readouterr().out)
    assert not all(c["pass"] for c in checks)


def test_default_time_grid_header(tmp_path):
    out = tmp_path / "rec.csv"
    run(["fluct", "--n", "50", "--a", "2", "--replicas", "100", "--out", str(out), "--ladder", "50"])
    header = out.read_text().splitlines()[0]
    assert header == "u_hat," + ",".join(f"W_{t}" for t in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0))


def test_dynamics_csv_and_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code = run(["dynamics", "--n", "3", "--alpha", "0.25", "--beta", "0.25", "--horizon", "20000",
                "--seed", "5", "--trace", str(trace)])
    lines = capsys.readouterr().out.splitlines()
    assert code in (0, 1)
    assert lines[0] == "site,mean,stderr" and len(lines) == 4
    assert trace.read_text().splitlines()[0] == "time,event,site"


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--n", "0", "--a", "2"],
        ["sample", "--n", "5"],
        ["sample", "--n", "5", "--a", "-1"],
        ["sample", "--n", "5", "--alpha", "0.3"],
        ["sample", "--n", "5", "--alpha", "1.5", "--beta", "0.3"],
        ["sample", "--n", "5", "--a", "2", "--replicas", "0"],
        ["fluct", "--n", "5", "--a", "2", "--times", "0.5,0.2"],
        ["fluct", "--n", "5", "--a", "0.5"],
        ["verify", "--n", "11", "--a", "2"],
        ["sample", "--n", "5", "--a", "2", "--exact-rational"],
        ["bogus"],
    ],
)
def test_usage_errors_exit_two(argv, capsys):
    assert run(argv) == 2


def test_io_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "missing" / "x.csv"
    assert run(["sample", "--n", "3", "--a", "2", "--out", str(bad)]) == 2
    assert str(bad) in capsys.readouterr().err


def test_workers_env_fallback(tmp_path):
    env = dict(os.environ, COEXLINE_WORKERS="2")
    argv = [sys.executable, "-m", "coexline.cli", "sample", "--n", "30", "--a", "3", "--replicas", "50", "--seed", "9"]
    with_env = subprocess.run(argv, env=env, capture_output=True, check=True).stdout
    env["COEXLINE_WORKERS"] = "1"
    without = subprocess.run(argv, env=env, capture_output=True, check=True).stdout
    assert with_env == without


def test_run_config_validation():
    with pytest.raises(ValueError):
        cli.RunConfig("plot", 3, 2.0, 2.0)
    with pytest.raises(ValueError):
        cli.RunConfig("sample", 3, 2.0, 2.0, seed=2**64)
    cfg = cli.RunConfig("sample", 3, 2.0, 2.0)
    assert cfg.times == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
