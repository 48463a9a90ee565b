import csv
import io
import json
import subprocess
import sys

import pytest

from sixvertex import __version__
from sixvertex.cli import main


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_nbwalk_eval_prints_value(capsys):
    rc, out, _ = run(capsys, "nbwalk", "eval", "n=8", "x=1", "y=1", "method=closed")
    assert rc == 0 and out.strip() == "4374"


@pytest.mark.parametrize("method", ["brute", "recurrence", "closed"])
def test_nbwalk_methods_agree(capsys, method):
    rc, out, _ = run(capsys, "nbwalk", "eval", "n=6", "x=1/2", "y=3", f"method={method}")
    assert rc == 0
    assert out.strip() == run(capsys, "nbwalk", "eval", "n=6", "x=1/2", "y=3", "method=recurrence")[1].strip()


def test_unknown_key_fails_fast(capsys, tmp_path):
    target = tmp_path / "a.json"
    rc, _, err = run(capsys, "nbwalk", "eval", "n=8", "x=1", "y=1", "colour=red", "--out", str(target))
    assert rc == 2 and "colour" in err
    assert not target.exists()


def test_stochastic_command_needs_seed(capsys, tmp_path):
    rc, _, err = run(capsys, "simulate", "run", "n=2", "steps=100", "--out", str(tmp_path / "s.json"))
    assert rc == 2 and "seed" in err
    assert list(tmp_path.iterdir()) == []


def test_malformed_config_writes_nothing(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("command = simulate run\nn 2\n[oops\n")
    rc, _, err = run(capsys, "run-config", str(cfg), "--out", str(tmp_path / "o.json"))
    assert rc == 2 and "malformed" in err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.cfg"]


def test_config_file_runs(capsys, tmp_path):
    cfg = tmp_path / "ok.cfg"
    cfg.write_text("# count states\ncommand = exact count\nn = 3\nboundary = domain-wall\n")
    rc, _, _ = run(capsys, "run-config", str(cfg), "--out", str(tmp_path / "o.json"))
    assert rc == 0
    art = json.loads((tmp_path / "o.json").read_text())
    assert art["result"]["states"] == 7 and art["config"]["boundary"] == "domain-wall"


def test_same_seed_same_bytes(capsys, tmp_path):
    paths = []
    for k in range(2):
        d = tmp_path / str(k)
        rc, _, _ = run(capsys, "simulate", "run", "n=3", "steps=5000", "thinning=500", "seed=11", "--out", str(d / "r.json"))
        assert rc == 0
        paths.append(d)
    names = sorted(p.name for p in paths[0].iterdir())
    assert names == sorted(p.name for p in paths[1].iterdir()) and len(names) >= 2
    for name in names:
        assert (paths[0] / name).read_bytes() == (paths[1] / name).read_bytes()


def test_different_seed_differs(capsys, tmp_path):
    for s in (1, 2):
        run(capsys, "simulate", "run", "n=3", "steps=5000", "thinning=500", f"seed={s}", "--out", str(tmp_path / f"r{s}.json"))
    assert (tmp_path / "r1.trajectory.jsonl").read_bytes() != (tmp_path / "r2.trajectory.jsonl").read_bytes()


def test_artifact_metadata_and_sidecar_header(capsys, tmp_path):
    rc, _, _ = run(capsys, "crw", "pdf", "n=3", "p=1/2", "--out", str(tmp_path / "pdf.json"))
    assert rc == 0
    art = json.loads((tmp_path / "pdf.json").read_text())
    assert art["version"] == __version__ and art["command"] == "crw pdf" and art["seed"] is None
    assert art["config"] == {"n": 3, "p": "1/2"}
    lines = (tmp_path / "pdf.csv").read_text().splitlines()
    assert json.loads(lines[0].lstrip("# "))["config"] == art["config"]
    rows = list(csv.DictReader(lines[1:]))
    assert [r["closed_form"] for r in rows] == [r["dynamic_programming"] for r in rows]
    assert rows[0]["closed_form"] == "1/64"


def test_outdir_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SIXVERTEX_OUTDIR", str(tmp_path))
    rc, out, _ = run(capsys, "crw", "simulate", "n=5", "p=0.5", "samples=100", "seed=3")
    assert rc == 0
    target = tmp_path / "crw-simulate-seed3.json"
    assert out.strip() == str(target)
    assert json.loads(target.read_text())["seed"] == 3


def test_phase_scan_examples(capsys):
    rc, out, _ = run(capsys, "phase-scan", "at=1:1,0.1:0.1,2.5:0.5")
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["phase"] for r in rows] == ["DO", "AFE", "FE"]
    assert rows[1]["afe_condition"] == "True" and rows[0]["afe_condition"] == "False"
    assert rows[2]["fe_condition"] == "True"


def test_phase_scan_grid_is_complete(capsys):
    rc, out, _ = run(capsys, "phase-scan", "points=5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rc == 0 and len(rows) == 25


def test_exact_chain_reports_conductance(capsys, tmp_path):
    rc, _, _ = run(capsys, "exact", "chain", "n=2", "boundary=domain-wall", "weights=1,1,4", "--out", str(tmp_path / "c.json"))
    assert rc == 0
    res = json.loads((tmp_path / "c.json").read_text())["result"]
    assert res["states"] == 2
    assert res["detailed_balance_violations"] == 0
    # two states swapped by the single internal face: periodic unless lazy
    assert res["mixing_time_quarter"] is None and "lazy" in res["note"]
    rc, _, _ = run(capsys, "exact", "chain", "n=2", "boundary=domain-wall", "lazy=true", "--out", str(tmp_path / "l.json"))
    res = json.loads((tmp_path / "l.json").read_text())["result"]
    assert res["mixing_time_quarter"] >= 1 / (4 * res["conductance"]["value"])


def test_ferro_build(capsys, tmp_path):
    rc, _, _ = run(capsys, "ferro", "build", "n=16", "ell=1", "d=4", "--out", str(tmp_path / "f.json"))
    assert rc == 0
    res = json.loads((tmp_path / "f.json").read_text())["result"]
    assert res["terminals"][0]["start"] == [0, 0]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "sixvertex", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
