import csv
import io
import json
import shutil
import subprocess
import sys

import pytest

from ergoqca import cli

CIRCUIT = "qubits 2 in 0 out 0\nlayer 0 pair 0 code 00\n"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_enumerate(capsys, tmp_path):
    code, out, _ = run(capsys, "enumerate", "--h", "2", "--c", "6")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert len(rows) == 13 and rows[0][0] == "index"
    target = tmp_path / "sub" / "configs.csv"
    assert run(capsys, "enumerate", "--h", "4", "--c", "10", "--out", str(target))[0] == 0
    assert len(target.read_text().splitlines()) == 81


def test_verify(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--h", "2", "--c", "6")
    doc = json.loads(out)
    assert code == 0 and doc["ok"]
    assert doc["normality_defect"] <= 1e-12
    circ = tmp_path / "f.txt"
    circ.write_text(CIRCUIT)
    code, out, _ = run(capsys, "verify", "--h", "2", "--c", "8", "--circuit", str(circ))
    doc = json.loads(out)
    assert code == 0 and doc["crosscheck"]["flagged"]
    assert doc["crosscheck"]["orthogonality_defect"] <= 1e-10


def test_verify_large_skips_crosscheck(capsys):
    code, out, _ = run(capsys, "verify", "--h", "4", "--c", "10")
    assert code == 0 and json.loads(out)["crosscheck"] is None


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--h", "2", "--c", "6")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and len(rows) == 25
    assert rows[0] == ["index", "h_eigenvalue", "f_modulus"]
    assert sum(float(r[1]) for r in rows[1:]) == pytest.approx(0, abs=1e-10)


def test_mix(capsys):
    code, out, _ = run(capsys, "mix", "--N", "16", "32")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["satisfied"] for r in rows] == ["1", "1"]
    code, out, _ = run(capsys, "mix", "--N", "16", "--a", "0")
    assert code == 1


def test_lemmas(capsys):
    code, out, _ = run(capsys, "lemmas", "--h", "4", "--c", "10")
    doc = json.loads(out)
    assert code == 0
    assert doc["expect_ftf"] == pytest.approx(0.5, abs=1e-12)
    assert all(r["literal_holds"] for r in doc["masses"])


def test_run_deterministic(capsys, tmp_path):
    circ = tmp_path / "f.txt"
    circ.write_text(CIRCUIT)
    args = ["run", "--h", "2", "--c", "20", "--m", "8", "--circuit", str(circ), "--shots", "5000", "--seed", "7"]
    _, first, _ = run(capsys, *args)
    _, second, _ = run(capsys, *args)
    assert first == second
    out_dir = tmp_path / "out"
    assert run(capsys, *args, "--out", str(out_dir), "--shots-csv")[0] == 0
    assert (out_dir / "report.json").read_text() == first
    assert len((out_dir / "shots.csv").read_text().splitlines()) == 5001
    assert not list(out_dir.glob(".*tmp"))


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "enumerate", "--h", "2")[0] == 2
    assert run(capsys, "enumerate", "--h", "2", "--c", "6", "--unknown")[0] == 2
    assert run(capsys, "run", "--h", "2", "--c", "20", "--m", "8", "--T", "-3")[0] == 2
    code, _, err = run(capsys, "run", "--h", "2", "--c", "20", "--m", "8", "--circuit", str(tmp_path / "missing.txt"))
    assert code == 2 and json.loads(err)["error"] == "UsageError"
    assert run(capsys, "run", "--h", "2", "--c", "20", "--m", "8", "--shots-csv")[0] == 2


def test_failures_report_json(capsys, tmp_path):
    code, out, err = run(capsys, "enumerate", "--h", "3", "--c", "6")
    payload = json.loads(err)
    assert code == 1 and out == ""
    assert payload["error"] == "DimensionError" and payload["stage"] == "lattice"
    code, _, err = run(capsys, "run", "--h", "2", "--c", "20", "--m", "8", "--shots", "0")
    assert code == 1 and json.loads(err)["stage"] == "readout"
    target = tmp_path / "never"
    code, _, err = run(capsys, "run", "--h", "2", "--c", "6", "--m", "5", "--out", str(target))
    assert code == 1 and json.loads(err)["stage"] == "gates"
    assert not target.exists()


def test_thread_env(capsys, monkeypatch):
    monkeypatch.setenv("ERGO_QCA_THREADS", "1")
    assert run(capsys, "spectrum", "--h", "2", "--c", "6")[0] == 0
    monkeypatch.setenv("ERGO_QCA_THREADS", "zero")
    assert run(capsys, "spectrum", "--h", "2", "--c", "6")[0] == 2


def test_module_entry_point():
    exe = shutil.which("ergoqca")
    cmd = [exe] if exe else [sys.executable, "-m", "ergoqca.cli"]
    done = subprocess.run(cmd + ["enumerate", "--h", "2", "--c", "8"], capture_output=True, text=True)
    assert done.returncode == 0
    assert len(done.stdout.splitlines()) == 17
