import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cosserat_lse import benchmarks as bm
from cosserat_lse import cli
from cosserat_lse import scenes as sc
from cosserat_lse import validation as va
from cosserat_lse.scene_io import save_scene, scene_hash, scene_to_dict


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_solve_rest_scene(tmp_path):
    scene_file = tmp_path / "rest.json"
    save_scene(sc.straight_rod(3), scene_file)
    out = tmp_path / "out"
    assert cli.main(["solve", str(scene_file), "--out", str(out)]) == 0
    residuals = read_csv(out / "residuals.csv")
    assert residuals[0] == ["step", "iteration", "residual_norm"] and len(residuals) == 2
    state = json.loads((out / "state.json").read_text())
    assert len(state["nodes"]) == 4 and len(state["elements"]) == 3
    assert state["elements"][0]["mean_strain"] == [0, 0, 0, 1, 0, 0]
    center = read_csv(out / "centerline.csv")
    assert center[0] == va.CENTERLINE_HEADER
    report = json.loads((out / "report.json").read_text())
    assert report["report"]["converged"] and report["scene_sha256"] == scene_hash(sc.straight_rod(3))


def test_solve_missing_constraints(tmp_path, capsys):
    doc = scene_to_dict(sc.straight_rod(2))
    doc["constraints"] = []
    path = tmp_path / "free.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["solve", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "rigid-body" in capsys.readouterr().err


def test_solve_cantilever_3N(tmp_path):
    path = tmp_path / "cantilever.json"
    assert cli.main(["generate", "cantilever", "--param", "force=3", "--param", "frame=dead", str(path)]) == 0
    out = tmp_path / "out"
    assert cli.main(["solve", str(path), "--out", str(out), "--ramp", "linear:3"]) == 0
    tip = np.array(json.loads((out / "state.json").read_text())["nodes"][-1]["position"])
    ref = va.shooting_reference(sc.cantilever(4, 3.0))[-1].position
    assert np.linalg.norm(tip - ref) / np.linalg.norm(ref) < 0.01
    assert len(read_csv(out / "residuals.csv")) > 3


def test_solve_not_converged_writes_partial(tmp_path):
    path = tmp_path / "c.json"
    save_scene(sc.cantilever(4, 1.0), path)
    out = tmp_path / "out"
    assert cli.main(["solve", str(path), "--out", str(out), "--max-iters", "2", "--tol", "1e-14"]) == 2
    for name in ("state.json", "residuals.csv", "centerline.csv", "report.json"):
        assert (out / name).exists()
    assert not json.loads((out / "report.json").read_text())["report"]["converged"]


def test_solve_bad_file(tmp_path, capsys):
    assert cli.main(["solve", str(tmp_path / "nope.json")]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_generate_minimal_lattice(tmp_path, capsys):
    path = tmp_path / "lat.json"
    assert cli.main(["generate", "lattice2d", "--param", "cells_x=1", "--param", "cells_y=1", str(path)]) == 0
    doc = json.loads(path.read_text())
    assert len(doc["nodes"]) == 4 and len(doc["elements"]) == 4
    assert cli.main(["solve", str(path), "--out", str(tmp_path / "o")]) == 0


def test_generate_defaults(tmp_path):
    path = tmp_path / "g.json"
    assert cli.main(["generate", "gridshell", str(path)]) == 0
    doc = json.loads(path.read_text())
    assert (len(doc["nodes"]), len(doc["elements"])) == (579, 1618)


def test_generate_errors(tmp_path, capsys):
    assert cli.main(["generate", "gridshell", "--param", "nodes=10", str(tmp_path / "g.json")]) == 1
    assert "achievable counts" in capsys.readouterr().err
    assert cli.main(["generate", "truss3d", "--param", "height=3", str(tmp_path / "t.json")]) == 1
    assert "parameters:" in capsys.readouterr().err
    assert cli.main(["generate", "truss3d", "--param", "layers", str(tmp_path / "t.json")]) == 1


def test_bench_exit_codes(tmp_path, monkeypatch, capsys):
    out = tmp_path / "pi"
    assert cli.main(["bench", "path-independence", "--out", str(out)]) == 0
    assert (out / "report.json").exists()

    def failing():
        return bm._result("cantilever", {"always fails": False, "fine": True}, {})

    monkeypatch.setitem(bm.BENCHMARKS, "cantilever", failing)
    assert cli.main(["bench", "cantilever"]) == 3
    text = capsys.readouterr().out
    assert "always fails" in text.split("failed checks:")[1] and "fine" not in text.split("failed checks:")[1]


def test_console_entry_point():
    run = subprocess.run([sys.executable, "-m", "cosserat_lse.cli", "--help"], capture_output=True, text=True)
    assert run.returncode == 0 and "solve" in run.stdout and "generate" in run.stdout


def test_threads_env_validation():
    bad = subprocess.run([sys.executable, "-c", "import cosserat_lse"], capture_output=True, text=True,
                         env={"COSSERAT_THREADS": "zero", "PATH": ""})
    assert bad.returncode != 0 and "COSSERAT_THREADS" in bad.stderr
    ok = subprocess.run([sys.executable, "-c", "import cosserat_lse, os; print(os.environ['OMP_NUM_THREADS'])"],
                        capture_output=True, text=True, env={"COSSERAT_THREADS": "2", "PATH": ""})
    assert ok.returncode == 0 and ok.stdout.strip() == "2"
