import csv
import io
import json
import subprocess
import sys

import pytest

from pricing_challenge import cli
from pricing_challenge.traces import read_simulation

CHEAP = "greedy,b-grid,ols"


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """The full eight-strategy roster at 10 x 100."""
    out = tmp_path_factory.mktemp("run") / "out"
    code = cli.main(["run", "--sims", "10", "--periods", "100", "--seed", "7", "--out", str(out)])
    return code, out


def test_run_writes_traces_manifest_and_report(default_run):
    code, out = default_run
    assert code == 0
    assert sorted(p.name for p in (out / "traces").iterdir()) == [
        f"sim-{i:06d}.jsonl" for i in range(10)]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["config"]["sims"] == 10
    assert len(manifest["files"]) == 10
    assert not (out / "PARTIAL").exists()
    names = {p.name for p in (out / "report").iterdir()}
    assert {"scores.csv", "shares.csv", "duopoly_revenue.csv", "extremes.csv", "prices.csv",
            "price_cv.csv", "segments.csv", "theta_buckets.csv"} <= names
    rows = list(csv.DictReader(open(out / "report" / "scores.csv")))
    assert len(rows) == 8
    assert sum(float(r["final"]) for r in rows) == pytest.approx(1.0, abs=1e-9)
    rec = read_simulation(out / "traces" / "sim-000003.jsonl")
    assert len(rec.competitions) == 29


def test_inspect_revenue_level_is_sampled(default_run, capsys):
    _, out = default_run
    assert cli.main(["inspect", str(out), "--sim", "3", "--kind", "oligopoly"]) == 0
    captured = capsys.readouterr()
    rows = list(csv.reader(io.StringIO(captured.out)))
    assert rows[0][0] == "period" and len(rows[0]) == 17
    assert len(rows) == 1 + 100 and "stride 1" in captured.err


def test_inspect_full_trace(tmp_path, capsys):
    out = tmp_path / "r"
    assert cli.main(["run", "--sims", "1", "--periods", "20", "--roster", CHEAP, "--out", str(out),
                     "--trace-level", "full"]) == 0
    capsys.readouterr()
    assert cli.main(["inspect", str(out), "--sim", "0", "--kind", "duopoly", "--pair", "0,2"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["period", "price_greedy", "price_ols", "revenue_greedy", "revenue_ols"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 21))
    rec = read_simulation(out / "traces" / "sim-000000.jsonl")
    duo = [c for c in rec.duopolies if c.members == (0, 2)][0]
    assert float(rows[5][1]) == duo.series()["prices"][4, 0]


def test_inspect_errors(tmp_path, default_run, capsys):
    _, out = default_run
    assert cli.main(["inspect", str(out), "--sim", "99"]) == 1
    assert cli.main(["inspect", str(out), "--sim", "0", "--kind", "duopoly", "--pair", "x"]) == 2
    assert cli.main(["inspect", str(out), "--sim", "0", "--kind", "duopoly", "--pair", "0,0"]) == 1


def test_rerun_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["run", "--sims", "3", "--periods", "30", "--seed", "5",
                         "--roster", CHEAP, "--out", str(out), "--trace-level", "full"]) == 0
        outs.append(out)
    for rel in ["manifest.json"] + [f"traces/sim-{i:06d}.jsonl" for i in range(3)]:
        assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()
    for p in (outs[0] / "report").iterdir():
        assert p.read_bytes() == (outs[1] / "report" / p.name).read_bytes()


def test_manifest_hash_changes_with_config(tmp_path):
    hashes = []
    for args in (["--seed", "1"], ["--seed", "1", "--parallel", "2"], ["--seed", "2"]):
        out = tmp_path / str(len(hashes))
        assert cli.main(["run", "--sims", "2", "--periods", "5", "--roster", CHEAP,
                         "--out", str(out)] + args) == 0
        hashes.append(json.loads((out / "manifest.json").read_text())["config_hash"])
    assert hashes[0] == hashes[1] != hashes[2]


def test_run_with_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"sims": 2, "periods": 10, "roster": ["greedy", "wls"],
                               "overrides": {"greedy": {"floor": 8.0}}}))
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["overrides"] == {"greedy": {"floor": 8.0}}
    assert manifest["config"]["roster"] == ["greedy", "wls"]


def test_report_subcommand(tmp_path, default_run, capsys):
    _, out = default_run
    dest = tmp_path / "rep"
    assert cli.main(["report", str(out), "--out", str(dest), "--first-k", "3"]) == 0
    assert "report over 10 simulations" in capsys.readouterr().out
    for p in dest.iterdir():
        if p.name != "shares.csv":
            assert p.read_bytes() == (out / "report" / p.name).read_bytes()
    sims = {r["sim"] for r in csv.DictReader(open(dest / "shares.csv"))}
    assert sims == {"0", "1", "2"}
    # the trace directory itself is accepted too
    assert cli.main(["report", str(out / "traces"), "--out", str(tmp_path / "rep2")]) == 0


def test_report_on_empty_or_missing_directory(tmp_path, capsys):
    assert cli.main(["report", str(tmp_path)]) == 1
    assert "no complete simulation traces" in capsys.readouterr().err
    assert cli.main(["report", str(tmp_path / "nope")]) == 1
    assert "does not exist" in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--sims", "0", "--out", str(tmp_path)]) == 2
    assert "sims must be >= 1" in capsys.readouterr().err
    assert cli.main(["run", "--roster", "greedy,bogus", "--out", str(tmp_path)]) == 2
    assert "unknown strategy 'bogus'" in capsys.readouterr().err
    assert cli.main(["run", "--roster", "greedy", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_io_failure_marks_partial(tmp_path, monkeypatch, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--sims", "1", "--periods", "2", "--roster", CHEAP,
                     "--out", str(blocker)]) == 1

    def boom(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "write_manifest", boom)
    out = tmp_path / "o"
    assert cli.main(["run", "--sims", "2", "--periods", "3", "--roster", CHEAP,
                     "--out", str(out)]) == 1
    assert "disk full" in (out / "PARTIAL").read_text()
    assert "partial" in capsys.readouterr().err


def test_stale_traces_are_replaced(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--sims", "4", "--periods", "3", "--roster", CHEAP,
                     "--out", str(out)]) == 0
    assert cli.main(["run", "--sims", "2", "--periods", "3", "--roster", CHEAP,
                     "--out", str(out)]) == 0
    assert len(list((out / "traces").iterdir())) == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    proc = subprocess.run([sys.executable, "-m", "pricing_challenge", "run", "--sims", "1",
                           "--periods", "5", "--roster", CHEAP, "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "greedy" in proc.stdout and (out / "manifest.json").exists()
