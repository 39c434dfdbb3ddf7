import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from sargmax_lab.changepoint import simulate_cp
from sargmax_lab.cli import CP_DEFAULTS, main
from sargmax_lab.processes import Rng
from sargmax_lab.skorohod import StepFn1D, to_dict
from sargmax_lab.verify import cp_model_from_params


def schema(name):
    text = resources.files("sargmax_lab").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(argv, name, out_dir, capsys):
    code, out, err = run(argv + ["--out-dir", out_dir], capsys)
    assert code == 0, err
    summary = json.loads(out.strip().splitlines()[-1])
    jsonschema.validate(summary, schema(name))
    on_disk = json.loads((Path(out_dir) / f"{name}.json").read_text())
    assert on_disk == summary
    return summary


@pytest.fixture
def step_files(tmp_path):
    f = StepFn1D((-1, 1), [-0.5, 0.4], [0.0, 2.0, 1.0])
    g = StepFn1D((-1, 1), [-0.45, 0.5], [0.0, 2.0, 1.0])
    pf, pg = tmp_path / "f.json", tmp_path / "g.json"
    pf.write_text(json.dumps(to_dict(f)))
    pg.write_text(json.dumps(to_dict(g)))
    jsonschema.validate(to_dict(f), schema("objects"))
    return pf, pg


def test_sargmax_command(step_files, tmp_path, capsys):
    s = run_json(["sargmax", "--input", step_files[0]], "sargmax", tmp_path, capsys)
    assert s["report"]["sargmax_point"] == [-0.5]
    assert s["report"]["largmax_point"] == [0.4]


def test_distance_command(step_files, tmp_path, capsys):
    s = run_json(["distance", "--f", step_files[0], "--g", step_files[1]], "distance", tmp_path, capsys)
    assert s["kind"] == "step" and s["exact"]
    assert 0 < s["distance"] <= s["sup_dist"]
    jsonschema.validate(s["warp"], schema("objects"))


def test_simulate_cpp_command(tmp_path, capsys):
    s = run_json(["simulate-cpp", "--seed", 3, "--horizon", 6], "simulate_cpp", tmp_path, capsys)
    path = json.loads((tmp_path / s["path_file"]).read_text())
    jsonschema.validate(path, schema("objects"))
    assert s["config"]["master_seed"] == 3


def test_fit_changepoint_command(tmp_path, capsys):
    data = simulate_cp(cp_model_from_params(CP_DEFAULTS["model"]), 80, Rng(1))
    data.to_csv(tmp_path / "d.csv")
    s = run_json(["fit-changepoint", "--input", tmp_path / "d.csv"], "fit_changepoint", tmp_path, capsys)
    assert s["n"] == 80 and 0.1 <= s["zeta"] <= 0.9


def test_deterministic_suite_command(tmp_path, capsys):
    s = run_json(["theorem1", "--n", "10,100"], "theorem1", tmp_path, capsys)
    assert s["ns"] == [10, 100]


def test_counterexample_command(tmp_path, capsys):
    s = run_json(["counterexample", "--reps", 5, "--n", "10,100"], "counterexample", tmp_path, capsys)
    assert s["passed"] and s["rows"] == 10
    assert (tmp_path / "counterexample.csv").read_text().startswith("path,n,")


def test_mc_changepoint_command(tmp_path, capsys):
    argv = ["mc-changepoint", "--reps", 20, "--ns", "100,200", "--oracle-draws", 200]
    s = run_json(argv, "mc_changepoint", tmp_path, capsys)
    assert len(s["ks"]) == 2 and s["oracle_draws"] == 200


def test_mc_cox_command(tmp_path, capsys):
    s = run_json(["mc-cox", "--reps", 50, "--ns", "60,120"], "mc_cox", tmp_path, capsys)
    assert [r["n"] for r in s["table"]] == [60, 120]


def test_config_file_and_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("master_seed = 5\nhorizon = 4.0\n[spec.law_pos]\nkind = 'point_mass'\nv = -1.0\n")
    s = run_json(["simulate-cpp", "--config", cfg], "simulate_cpp", tmp_path, capsys)
    assert s["config"]["spec"]["law_pos"] == {"kind": "point_mass", "v": -1.0}
    bad = tmp_path / "bad.toml"
    bad.write_text("master_seed = 5\nhorizn = 4.0\n")
    code, _, err = run(["simulate-cpp", "--config", bad, "--out-dir", tmp_path], capsys)
    assert code == 1 and "horizn" in err


def test_invalid_inputs_exit_one(tmp_path, capsys):
    assert run([], capsys)[0] == 1
    assert run(["sargmax", "--input", tmp_path / "missing.json", "--out-dir", tmp_path], capsys)[0] == 1
    assert run(["theorem1", "--n", "ten"], capsys)[0] == 1
    cfg = tmp_path / "pos.toml"
    cfg.write_text("[spec.law_pos]\nkind = 'normal'\nmu = 1.0\nsigma = 1.0\n")
    assert run(["simulate-cpp", "--config", cfg, "--out-dir", tmp_path], capsys)[0] == 1


def test_failed_replications_exit_two(tmp_path, capsys):
    # near-total censoring leaves most small samples without an event
    cfg = tmp_path / "cox.toml"
    cfg.write_text("[model.censor]\nkind = 'exponential'\nrate = 1e6\n")
    code, _, err = run(["mc-cox", "--config", cfg, "--reps", 50, "--ns", "5", "--out-dir", tmp_path], capsys)
    assert code == 2, err
    assert "replications failed" in err


def test_non_finite_law_rejected(tmp_path, capsys):
    cfg = tmp_path / "cp.toml"
    cfg.write_text("[model.eps_law]\nkind = 'normal'\nsigma = inf\n")
    assert run(["mc-changepoint", "--config", cfg, "--out-dir", tmp_path], capsys)[0] == 1


def test_entry_point_subprocess(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "sargmax_lab", "theorem1", "--n", "10", "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert json.loads(out.stdout)["command"] == "theorem1"


def test_outputs_bitwise_deterministic(tmp_path, capsys):
    dirs = []
    for threads in (1, 2):
        d = tmp_path / f"t{threads}"
        d.mkdir()
        argv = ["counterexample", "--reps", 6, "--n", "10,100", "--threads", threads, "--out-dir", d]
        assert run(argv, capsys)[0] == 0
        dirs.append(d)
    for name in ("counterexample.json", "counterexample.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
