import json
import subprocess
import sys

import numpy as np
import pytest

from momentbody.cli import main
from momentbody.instances import preconditioning_example_map, write_instance
from momentbody.moment_map import Instance


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def e21(tmp_path):
    path = tmp_path / "e21.json"
    assert run("generate", "--kind", "example-2.1", "--b", "0.3,-0.2", "--out", path) == 0
    return path


def test_solve_feasible_and_verify(e21, tmp_path, capsys):
    cert = tmp_path / "cert.json"
    assert run("solve", e21, "--out", cert) == 0
    out = capsys.readouterr().out
    assert "verdict:    feasible" in out
    data = json.loads(cert.read_text())
    assert data["verdict"] == "feasible"
    assert run("verify", e21, cert) == 0
    assert "PASS" in capsys.readouterr().out


def test_solve_infeasible_prints_gap(tmp_path, capsys):
    inst = tmp_path / "i.json"
    run("generate", "--kind", "interval", "--b", "1", "--out", inst)
    cert = tmp_path / "c.json"
    assert run("solve", inst, "--out", cert) == 1
    assert "gap:" in capsys.readouterr().out
    assert json.loads(cert.read_text())["verdict"] == "infeasible"
    assert run("verify", inst, cert) == 0


def test_solve_solver_infeasible(tmp_path):
    inst = tmp_path / "inf.json"
    run("generate", "--kind", "infeasible", "--n", 6, "--m", 4, "--seed", 3, "--margin", 0.05, "--out", inst)
    assert run("solve", inst) == 1


def test_not_interior_and_indeterminate_exit_codes(tmp_path):
    vert = tmp_path / "v.json"
    run("generate", "--kind", "example-2.1", "--b=-0.5,0.5", "--out", vert)
    assert run("solve", vert, "--max-iters", 5000) == 2
    rnd = tmp_path / "r.json"
    run("generate", "--n", 8, "--m", 6, "--out", rnd)
    cert = tmp_path / "c.json"
    assert run("solve", rnd, "--max-iters", 1, "--out", cert) == 3
    assert json.loads(cert.read_text())["verdict"] == "indeterminate"
    assert run("verify", rnd, cert) == 3


def test_verify_detects_tampering(e21, tmp_path):
    cert = tmp_path / "c.json"
    run("solve", e21, "--out", cert)
    data = json.loads(cert.read_text())
    data["payload"]["X"] = (np.eye(3) / 3).tolist()
    cert.write_text(json.dumps(data))
    assert run("verify", e21, cert) == 1


def test_verbose_trace_on_stderr(e21, capsys):
    run("solve", e21, "--verbose")
    err = capsys.readouterr().err
    assert "|grad|" in err and len(err.splitlines()) >= 3


def test_malformed_and_missing(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert run("solve", bad) == 65
    assert run("solve", tmp_path / "missing.json") == 66


def test_usage_errors(e21, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("solve")
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 64
    assert run("solve", e21, "--tol", "-1") == 64
    assert run("generate", "--kind", "example-2.1", "--b", "1", "--out", tmp_path / "x.json") == 64


def test_no_precondition_guard(tmp_path):
    raw = tmp_path / "raw.json"
    write_instance(Instance(preconditioning_example_map(), [1.0, 0.5]), raw)
    assert run("solve", raw, "--no-precondition") == 64
    assert run("solve", raw, "--no-precondition", "--force") in (0, 1)


def test_precondition_command(tmp_path):
    raw = tmp_path / "raw.json"
    write_instance(Instance(preconditioning_example_map(), [1.0, 0.5]), raw)
    out = tmp_path / "pre.json"
    assert run("precondition", raw, "--out", out) == 0
    pre = json.loads(out.read_text())
    assert pre["flags"] == {"traceless": True, "orthonormal": True}
    rec = json.loads((tmp_path / "pre.record.json").read_text())
    assert rec["kind"] == "transform_record"
    # Exit codes agree between raw and preconditioned files.
    assert run("solve", raw) == run("solve", out, "--no-precondition")


def test_boundary_csv_and_json(e21, tmp_path):
    csv_out = tmp_path / "b.csv"
    assert run("boundary", e21, "--directions", 360, "--out", csv_out) == 0
    lines = csv_out.read_text().splitlines()
    assert lines[0] == "body,u1,u2,support,x1,x2"
    assert len(lines) == 361
    js = tmp_path / "b.json"
    assert run("boundary", e21, "--directions", 10, "--both", "--format", "json", "--out", js) == 0
    rows = json.loads(js.read_text())
    assert len(rows) == 20 and {r["body"] for r in rows} == {"raw", "preconditioned"}


def test_boundary_rejects_m4(tmp_path):
    inst = tmp_path / "r.json"
    run("generate", "--n", 5, "--m", 4, "--out", inst)
    assert run("boundary", inst) == 64


def test_bench(tmp_path, capsys):
    assert run("bench", "--grid", "6,8", "--seeds", 2) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("n,m,seeds,median_time_s,median_iters")
    assert len(lines) == 3
    assert run("bench", "--grid", "") == 64
    assert run("bench", "--grid", "6", "--m", "3,4") == 64


def test_bench_deterministic_iterations(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("bench", "--grid", "10", "--seeds", 3, "--format", "json", "--out", a)
    run("bench", "--grid", "10", "--seeds", 3, "--format", "json", "--out", b)
    assert json.loads(a.read_text())[0]["iters"] == json.loads(b.read_text())[0]["iters"]


def test_console_entry_point(e21):
    proc = subprocess.run([sys.executable, "-m", "momentbody.cli", "solve", str(e21)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "feasible" in proc.stdout
