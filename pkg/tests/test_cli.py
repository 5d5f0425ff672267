import csv
import json

import pytest

from cheatsim.cli import main

SYNC_ONE_CERTAIN = """
[scenario]
mode = sync
n = 4
horizon = 1
trials = 50
seed = 3
[process.2]
epsilon = 1.0
"""


def write(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    rows = [r for r in csv.reader(open(path)) if not r[0].startswith("#")]
    return rows[0], [[float(x) for x in r[1:]] for r in rows[1:]]


def test_analytic_inline_csv(tmp_path):
    assert main(["analytic", "--eps", "0,1,0", "--d", "1", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "analytic_d1.csv")
    assert header == ["observer", "1", "2", "3"]
    assert rows == [[0.0, 1.0, 0.0]] * 3
    meta = [l for l in open(tmp_path / "analytic_d1.csv") if l.startswith("#")]
    assert "# n=3\n" in meta and "# d=1\n" in meta


def test_analytic_stdout_single_cell(capsys):
    assert main(["analytic", "--eps", "0.5", "--d", "3"]) == 0
    assert "1,0.875" in capsys.readouterr().out


def test_analytic_sequences_json(tmp_path):
    assert main(["analytic", "--eps", "0.2/0.2,0.4/0.4", "--d", "2", "--format", "json",
                 "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "analytic_d2.json").read_text())
    assert data["schema_version"] == 1
    assert data["matrix"][0] == pytest.approx([0.36, 0.64], abs=1e-15)


def test_analytic_from_scenario_checkpoints(tmp_path):
    text = SYNC_ONE_CERTAIN.replace("horizon = 1", "horizon = 4\ncheckpoints = 1, 4")
    assert main(["analytic", "-s", write(tmp_path, text), "-o", str(tmp_path / "o")]) == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["analytic_d1.csv", "analytic_d4.csv"]


def test_csv_precision(tmp_path):
    main(["analytic", "--eps", "0.1234567890123457", "--d", "7", "--out", str(tmp_path)])
    _, rows = read_csv(tmp_path / "analytic_d7.csv")
    assert rows[0][0] == 1 - (1 - 0.1234567890123457) ** 7


def test_analytic_errors(capsys):
    assert main(["analytic", "--eps", "0.2,1.5", "--d", "1"]) == 2
    assert "1.5" in capsys.readouterr().err
    assert main(["analytic", "--eps", "0.2"]) == 2
    assert main(["analytic"]) == 2
    assert main(["bogus"]) == 2


def test_write_failure_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["analytic", "--eps", "0.2", "--d", "1", "--out", str(blocker / "sub")]) == 2


def test_simulate_all_honest(tmp_path, capsys):
    text = SYNC_ONE_CERTAIN.replace("epsilon = 1.0", "epsilon = 0.0")
    assert main(["simulate", "-s", write(tmp_path, text), "-o", str(tmp_path)]) == 0
    assert "detections: 0" in capsys.readouterr().out
    trace = json.loads((tmp_path / "trace.json").read_text())
    assert trace["schema_version"] == 1 and trace["mode"] == "sync"
    assert trace["config"]["n"] == 4


def test_simulate_detects_certain_cheater(tmp_path, capsys):
    assert main(["simulate", "-s", write(tmp_path, SYNC_ONE_CERTAIN), "-o", str(tmp_path)]) == 0
    trace = json.loads((tmp_path / "trace.json").read_text())
    assert trace["steps"][0]["detected"] == [2]
    assert all(b["known_cheaters"] == {"2": 1} for b in trace["beliefs"])
    assert "day 1: detected [2]" in capsys.readouterr().out


def test_simulate_async(tmp_path):
    text = """
    [scenario]
    mode = async
    n = 4
    horizon = 5
    group_size = 2
    seed = 8
    [process.3]
    epsilon = 0.5
    """
    assert main(["simulate", "-s", write(tmp_path, text), "-o", str(tmp_path)]) == 0
    trace = json.loads((tmp_path / "trace.json").read_text())
    assert trace["mode"] == "async" and trace["rounds_completed"] >= 5


def test_estimate_all_honest_passes(tmp_path):
    text = SYNC_ONE_CERTAIN.replace("epsilon = 1.0", "epsilon = 0.0").replace("trials = 50", "trials = 100")
    assert main(["estimate", "-s", write(tmp_path, text), "-o", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["all_pass"] and report["checkpoints"][0]["fail_count"] == 0
    assert (tmp_path / "counts_d1.csv").exists() and (tmp_path / "empirical_d1.csv").exists()


def test_estimate_zero_floor_tiny_sample_fails(tmp_path):
    text = """
    [scenario]
    mode = sync
    n = 8
    horizon = 1
    trials = 10
    seed = 1
    tolerance_floor = 0
    [process.1]
    epsilon = 0.05
    """
    assert main(["estimate", "-s", write(tmp_path, text), "-o", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["checkpoints"][0]["fail_count"] > 0


def test_estimate_overrides_and_json_format(tmp_path):
    path = write(tmp_path, SYNC_ONE_CERTAIN)
    assert main(["estimate", "-s", path, "-o", str(tmp_path), "--format", "json",
                 "--trials", "20", "--seed", "77", "--floor", "0.01"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["trials"] == 20 and report["config"]["seed"] == 77
    assert report["config"]["tolerance_floor"] == 0.01
    assert report["checkpoints"][0]["counts"][0] == [0, 20, 0, 0]


def test_estimate_config_error_exit(tmp_path, capsys):
    bad = SYNC_ONE_CERTAIN.replace("epsilon = 1.0", "epsilon = 1.5")
    assert main(["estimate", "-s", write(tmp_path, bad)]) == 2
    assert "process 2" in capsys.readouterr().err


def test_estimate_k_exceeds_n(tmp_path, capsys):
    bad = SYNC_ONE_CERTAIN.replace("mode = sync", "mode = async\ngroup_size = 5")
    assert main(["estimate", "-s", write(tmp_path, bad)]) == 2
    assert "k > n" in capsys.readouterr().err


def test_output_dir_from_scenario(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    text = SYNC_ONE_CERTAIN.replace("seed = 3", "seed = 3\noutput_dir = results")
    assert main(["simulate", "-s", write(tmp_path, text)]) == 0
    assert (tmp_path / "results" / "trace.json").exists()


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "cheatsim", "analytic", "--eps", "0,0.5", "--d", "3"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[-1] == "2,0.0,0.875"
