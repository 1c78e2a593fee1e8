import csv
import json

import pytest

from mpstomo.cli import main
from mpstomo.mps import load_mps


def run(*argv):
    return main([str(a) for a in argv])


def manifest(run_dir):
    return json.loads((run_dir / "manifest.json").read_text())


@pytest.fixture(scope="module")
def surface_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("surface")
    assert run("generate-state", "--system", "surface-code", "--lx", 3, "--ly", 3, "--chi", 8, "--run-dir", d) == 0
    assert run("sample", "--n-samples", 400, "--seed", 3, "--run-dir", d) == 0
    return d


def test_generate_surface_code_energy(surface_run):
    sidecar = json.loads((surface_run / "target.json").read_text())
    assert sidecar["n"] == 9
    assert sidecar["energy"] == pytest.approx(-8.0, abs=1e-8)
    assert load_mps(surface_run / "target.mps").n == 9


def test_generate_ghz(tmp_path):
    assert run("generate-state", "--system", "ghz", "--n", 3, "--run-dir", tmp_path) == 0
    state = load_mps(tmp_path / "target.mps")
    assert state.n == 3 and state.bond_dims == (1, 2, 2, 1)


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["--system", "surface-code", "--lx", "1"], "--lx"),
        (["--system", "ruby", "--ly", "0"], "--ly"),
        (["--system", "ghz"], "--n"),
        (["--system", "product", "--bits", "01x"], "--bits"),
    ],
)
def test_invalid_lattice_names_flag(tmp_path, capsys, argv, flag):
    assert main(["generate-state", *argv, "--run-dir", str(tmp_path)]) == 2
    assert flag in capsys.readouterr().err


def test_sample_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("generate-state", "--system", "random", "--n", 4, "--chi", 2, "--seed", 5, "--run-dir", d) == 0
        assert run("sample", "--ensemble", "random-xz", "--n-samples", 1000, "--seed", 1, "--run-dir", d) == 0
    lines = (a / "dataset.jsonl").read_text().splitlines()
    assert len(lines) == 1001
    assert (a / "dataset.jsonl").read_bytes() == (b / "dataset.jsonl").read_bytes()
    assert (a / "target.mps").read_bytes() == (b / "target.mps").read_bytes()
    ma, mb = manifest(a), manifest(b)
    for cmd in ("generate-state", "sample"):
        assert ma["commands"][cmd]["outputs"] == mb["commands"][cmd]["outputs"]


def test_global_xz_ghz_z_lines(tmp_path):
    run("generate-state", "--system", "ghz", "--n", 3, "--run-dir", tmp_path)
    run("sample", "--ensemble", "global-xz", "--n-samples", 300, "--seed", 2, "--run-dir", tmp_path)
    rows = [json.loads(line) for line in (tmp_path / "dataset.jsonl").read_text().splitlines()[1:]]
    z_bits = {r["bits"] for r in rows if r["basis"] == "ZZZ"}
    assert z_bits and z_bits <= {"000", "111"}


def test_end_to_end_zero_state(tmp_path):
    assert run("generate-state", "--system", "product", "--bits", "0000", "--run-dir", tmp_path) == 0
    assert run("sample", "--n-samples", 2000, "--seed", 0, "--run-dir", tmp_path) == 0
    assert run("train", "--chi", 2, "--restarts", 2, "--epochs", 5, "--seed", 0, "--run-dir", tmp_path) == 0
    assert run("evaluate", "--observable", "Z0 Z1", "--cut", 2, "--run-dir", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["fidelity"] > 0.99
    m = manifest(tmp_path)
    assert set(m["commands"]) == {"generate-state", "sample", "train", "evaluate"}
    entry = m["commands"]["train"]
    assert {"command", "config", "seeds", "inputs", "outputs", "started", "finished", "artifact_version"} <= set(entry)
    assert entry["seeds"] == {"seed": 0}
    assert set(entry["outputs"]) == {"model.mps", "history.csv", "train.json"}


def test_train_reruns_byte_identical(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        run("generate-state", "--system", "random", "--n", 3, "--chi", 2, "--seed", 1, "--run-dir", d)
        run("sample", "--n-samples", 300, "--seed", 4, "--run-dir", d)
        assert run("train", "--chi", 2, "--restarts", 2, "--epochs", 3, "--lbfgs-maxiter", 50, "--run-dir", d) == 0
    for name in ("model.mps", "history.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_stabilizer_estimates_feed_training(surface_run):
    assert run("evaluate", "--estimate-stabilizers", "--lx", 3, "--ly", 3, "--run-dir", surface_run) == 0
    est = json.loads((surface_run / "stabilizer_estimates.json").read_text())
    assert est["N"] == 400 and len(est["estimates"]) == 8
    code = run(
        "train", "--beta", 5, "--regularizer", "stabilizers",
        "--stabilizer-estimates", surface_run / "stabilizer_estimates.json",
        "--chi", 2, "--restarts", 1, "--epochs", 2, "--lbfgs-maxiter", 30, "--run-dir", surface_run,
    )
    assert code == 0
    cfg = json.loads((surface_run / "train_config.json").read_text())
    assert cfg["beta"] == 5
    assert cfg["regularizer"]["kind"] == "stabilizers"
    assert len(cfg["regularizer"]["estimates"]) == 8
    assert "evaluate-stabilizers" in manifest(surface_run)["commands"]


def test_stabilizer_regularizer_requires_file(surface_run, capsys):
    assert run("train", "--beta", 5, "--regularizer", "stabilizers", "--run-dir", surface_run) == 2
    assert "--stabilizer-estimates" in capsys.readouterr().err


def test_scaling_rows_match_grid(tmp_path):
    run("generate-state", "--system", "ghz", "--n", 3, "--run-dir", tmp_path)
    code = run(
        "scaling", "--n-grid", "100,200,400", "--seeds", "0-1",
        "--chi", 2, "--restarts", 1, "--epochs", 3, "--run-dir", tmp_path,
    )
    assert code == 0
    with open(tmp_path / "scaling.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["N"]) for r in rows] == [100, 200, 400]
    report = json.loads((tmp_path / "report.json").read_text())
    assert "3" in report["fits"] and len(report["runs"]) == 6
    cells = sorted(p.name for p in (tmp_path / "cells").iterdir())
    assert len(cells) == 6 and "N100_s0" in cells

    again = tmp_path / "again"
    assert run("scaling", "--from-runs", *sorted((tmp_path / "cells").iterdir()), "--run-dir", again) == 0
    assert (again / "scaling.csv").read_bytes() == (tmp_path / "scaling.csv").read_bytes()


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"system": "ghz", "n": 4}))
    assert run("generate-state", "--config", cfg, "--run-dir", tmp_path / "a") == 0
    assert load_mps(tmp_path / "a" / "target.mps").n == 4
    assert run("generate-state", "--config", cfg, "--n", 2, "--run-dir", tmp_path / "b") == 0
    assert load_mps(tmp_path / "b" / "target.mps").n == 2


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"system": "ghz", "qubits": 4}))
    assert run("generate-state", "--config", cfg, "--run-dir", tmp_path) == 2
    assert "qubits" in capsys.readouterr().err


def test_run_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MPSTOMO_RUN_ROOT", str(tmp_path))
    assert run("generate-state", "--system", "ghz", "--n", 2, "--run", "demo") == 0
    assert (tmp_path / "demo" / "target.mps").exists()


def test_missing_input_exit_code(tmp_path, capsys):
    assert run("sample", "--n-samples", 10, "--state", tmp_path / "nope.mps", "--run-dir", tmp_path) == 2
    assert "nope.mps" in capsys.readouterr().err
